#!/usr/bin/env python3
"""Render harness CSV outputs: histogram figures and markdown result tables.

Read-only over the simulation outputs; all statistics are computed upstream,
this layer only draws and formats.

Usage:
  render.py --hist <csv> [--oracle <csv>] [--ref <float:label>]... --out <file>
  render.py --table <csv>... --out <md>
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TABLE_ROW_LABELS = (
    "Expected theta-hat",
    "Empirical theta-hat Variance",
    "Estimated theta-hat Variance (AS)",
    "Estimated theta-hat Variance (S)",
    "Coverage (95% Interval, AS)",
    "Coverage (95% Interval, S)",
)


class SchemaError(ValueError):
    pass


def _read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_histogram_csv(path):
    """bin_left,bin_right,count columns -> (edges, counts)."""
    rows = _read_csv(path)
    required = {"bin_left", "bin_right", "count"}
    have = set(rows[0].keys()) if rows else required
    missing = required - have
    if missing:
        raise SchemaError(f"{path}: missing column(s) {sorted(missing)}")
    lefts = [float(r["bin_left"]) for r in rows]
    rights = [float(r["bin_right"]) for r in rows]
    counts = [int(r["count"]) for r in rows]
    edges = lefts + rights[-1:] if lefts else []
    return np.array(edges), np.array(counts)


def read_draws_csv(path) -> np.ndarray:
    rows = _read_csv(path)
    if rows and "draw" not in rows[0]:
        raise SchemaError(f"{path}: missing column(s) ['draw']")
    return np.array([float(r["draw"]) for r in rows])


@dataclass
class PlotSpec:
    hist_csv: str
    out: str
    title: str = ""
    oracle_csv: str = None
    refs: list = field(default_factory=list)   # (value, label) pairs


@dataclass
class RenderResult:
    """What was drawn, for verification against the source CSV."""

    edges: np.ndarray
    counts: np.ndarray
    oracle_counts: np.ndarray = None


def render_histogram(spec: PlotSpec) -> RenderResult:
    edges, counts = read_histogram_csv(spec.hist_csv)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    oracle_counts = None
    if len(edges):
        widths = np.diff(edges)
        ax.bar(edges[:-1], counts, width=widths, align="edge",
               color="#4878b0", alpha=0.8, label="replications")
        if spec.oracle_csv:
            draws = read_draws_csv(spec.oracle_csv)
            raw, _ = np.histogram(draws, bins=edges)
            scale = counts.sum() / max(raw.sum(), 1)
            oracle_counts = raw * scale
            ax.stairs(oracle_counts, edges, color="#d1615d", linewidth=1.8,
                      label="reference law (scaled)")
    for value, label in spec.refs:
        ax.axvline(value, color="#333333", linestyle="--", linewidth=1.2)
        ax.annotate(label, xy=(value, 1.0), xycoords=("data", "axes fraction"),
                    xytext=(3, -12), textcoords="offset points", fontsize=9)
    if spec.title:
        ax.set_title(spec.title)
    ax.set_xlabel("estimate")
    ax.set_ylabel("replications")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(spec.out)
    plt.close(fig)
    return RenderResult(edges=edges, counts=counts, oracle_counts=oracle_counts)


def _fmt_sig3(raw: str) -> str:
    if raw == "N/A" or raw == "":
        return "N/A"
    value = float(raw)
    if value == 0:
        return "0"
    return f"{value:.3g}"


def render_table(summary_csvs) -> str:
    """Markdown table: one column per summary, the six fixed row labels."""
    columns = []
    for path in summary_csvs:
        rows = _read_csv(path)
        if not rows:
            raise SchemaError(f"{path}: empty summary CSV")
        row = rows[0]
        missing = [label for label in TABLE_ROW_LABELS if label not in row]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        name = row.get("label") or row.get("policy") or Path(path).stem
        columns.append((name, row))
    header = "| |" + "|".join(name for name, _ in columns) + "|"
    sep = "|---|" + "|".join("---" for _ in columns) + "|"
    lines = [header, sep]
    for label in TABLE_ROW_LABELS:
        cells = [_fmt_sig3(row[label]) for _, row in columns]
        lines.append(f"|{label}|" + "|".join(cells) + "|")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--hist", help="histogram CSV to draw")
    parser.add_argument("--oracle", help="oracle draw CSV to overlay")
    parser.add_argument("--ref", action="append", default=[],
                        metavar="FLOAT:LABEL",
                        help="vertical reference line; write --ref=-0.0625:label "
                             "for negative values")
    parser.add_argument("--table", nargs="+", help="summary CSVs to tabulate")
    parser.add_argument("--title", default="")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    try:
        if args.hist and args.table:
            raise SchemaError("choose one of --hist or --table")
        if args.hist:
            refs = []
            for item in args.ref:
                value, _, label = item.partition(":")
                refs.append((float(value), label))
            render_histogram(PlotSpec(hist_csv=args.hist, out=args.out,
                                      title=args.title, oracle_csv=args.oracle,
                                      refs=refs))
        elif args.table:
            Path(args.out).write_text(render_table(args.table))
        else:
            raise SchemaError("nothing to do: pass --hist or --table")
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
