"""Command-line entry point: run, replicate, report, hist, oracle."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .engine import run_trial, save_trajectories, summarize_trial
from .errors import ConfigurationError, DomainError, OracleUnavailableError
from .estimators import theta_star_oracle
from .harness import (histogram_export, mc_theta_star, read_theta_csv,
                      run_replications, write_histogram_csv, write_summary_csv,
                      write_summary_json, write_theta_csv, TABLE_ROW_LABELS)
from .limits import MisspecifiedGLaw, ScaledUniformLaw, TwoPointLaw
from .presets import PRESET_NOTES, PRESETS, parse_config, preset_config
from .rng import SeedSpec, derive_stream

ORACLE_KINDS = ("two-point", "scaled-uniform", "misspecified-g")


def _preset_epilog() -> str:
    lines = ["presets:"]
    for name in sorted(PRESETS):
        lines.append(f"  {name:<18} {PRESET_NOTES[name]}")
    return "\n".join(lines)


def _load_config(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    if args.reps is not None:
        overrides.append(f"reps={args.reps}")
    if args.preset:
        return preset_config(args.preset, overrides)
    if not args.config:
        raise ConfigurationError("need --preset or --config")
    return parse_config(args.config, overrides)


def _add_config_flags(sub):
    sub.add_argument("--preset", choices=sorted(PRESETS), help="compiled-in experiment")
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a config key (dotted paths allowed); repeatable")
    sub.add_argument("--seed", type=int, help="override the master seed")
    sub.add_argument("--reps", type=int, help="override the replication count")
    sub.add_argument("--out", default=".", help="output directory")


def cmd_run(args) -> int:
    resolved = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trajs = run_trial(resolved.trial)
    save_trajectories(trajs, out / "trajectories.csv", out / "snapshots.json")
    with open(out / "trial_summary.json", "w") as fh:
        json.dump(summarize_trial(trajs), fh, indent=1)
    with open(out / "resolved_config.json", "w") as fh:
        json.dump(resolved.resolved_dict(), fh, indent=1)
    print(f"wrote trajectories.csv, snapshots.json, trial_summary.json to {out}")
    return 0


def _resolve_theta_star(args, resolved):
    if args.theta_star is not None:
        return args.theta_star
    trial = resolved.trial
    try:
        return theta_star_oracle(trial.env, trial.policy)
    except OracleUnavailableError:
        pass
    if args.mc_oracle_reps:
        return mc_theta_star(trial, resolved.estimand, reps=args.mc_oracle_reps,
                             n=args.mc_oracle_n, parallelism=args.threads)
    return None


def cmd_replicate(args) -> int:
    resolved = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    theta_star = _resolve_theta_star(args, resolved)
    t0 = time.time()
    summary = run_replications(resolved.trial, resolved.estimand, resolved.reps,
                               parallelism=args.threads, theta_star=theta_star)
    write_summary_json(summary, out / "summary.json")
    write_summary_csv(summary, out / "summary.csv",
                      label=resolved.raw.get("preset", ""))
    write_theta_csv(summary, out / "theta.csv")
    with open(out / "resolved_config.json", "w") as fh:
        json.dump(resolved.resolved_dict(), fh, indent=1)
    with open(out / "run_info.json", "w") as fh:
        json.dump({"wall_time_s": time.time() - t0, "threads": args.threads}, fh, indent=1)
    if args.save_trajectories:
        trajs = run_trial(resolved.trial)
        save_trajectories(trajs, out / "trajectories.csv", out / "snapshots.json")
    print(f"wrote summary.json, summary.csv, theta.csv to {out}")
    return 0


def cmd_report(args) -> int:
    rows = {label: [] for label in TABLE_ROW_LABELS}
    names = []
    for path in args.summaries:
        with open(path) as fh:
            data = json.load(fh)
        names.append(data.get("policy_kind", Path(path).stem))

        def cell(key):
            v = data.get(key)
            if v is None or isinstance(v, dict):
                return "N/A"
            return f"{np.atleast_1d(v)[0]:.3g}"
        rows[TABLE_ROW_LABELS[0]].append(cell("mean_theta_hat"))
        rows[TABLE_ROW_LABELS[1]].append(cell("empirical_variance"))
        rows[TABLE_ROW_LABELS[2]].append(cell("mean_var_adaptive"))
        rows[TABLE_ROW_LABELS[3]].append(cell("mean_var_standard"))
        rows[TABLE_ROW_LABELS[4]].append(cell("coverage_adaptive"))
        rows[TABLE_ROW_LABELS[5]].append(cell("coverage_standard"))
    width = max(len(label) for label in TABLE_ROW_LABELS)
    print(" " * width + "  " + "  ".join(f"{n:>12}" for n in names))
    for label in TABLE_ROW_LABELS:
        print(f"{label:<{width}}  " + "  ".join(f"{v:>12}" for v in rows[label]))
    return 0


def cmd_hist(args) -> int:
    values = read_theta_csv(args.theta_csv, coordinate=args.coordinate)
    value_range = tuple(args.range) if args.range else None
    hist = histogram_export(values, bins=args.bins, value_range=value_range)
    write_histogram_csv(hist, args.out)
    print(f"wrote {args.out} ({int(hist.counts.sum())} values in {args.bins} bins)")
    return 0


def cmd_oracle(args) -> int:
    stream = derive_stream(SeedSpec(args.seed, 0, "oracle"))
    if args.kind == "two-point":
        draws = TwoPointLaw(eps=args.eps).sample(args.count, stream)
    elif args.kind == "scaled-uniform":
        draws = ScaledUniformLaw().sample(args.count, stream)
    else:
        law = MisspecifiedGLaw(eps=args.eps, n_points=args.quad_points)
        if args.finite_n:
            draws = law.sample_finite_n(args.count, args.finite_n, stream)[:, args.coordinate]
        else:
            draws = law.sample(args.count, stream)[:, args.coordinate]
    with open(args.out, "w") as fh:
        fh.write("draw\n")
        for v in np.atleast_1d(draws):
            fh.write(repr(float(v)) + "\n")
    print(f"wrote {args.count} {args.kind} draws to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banditrep",
        description="Simulation and inference for pooled-bandit adaptive trials",
        epilog=_preset_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one trial and save trajectories")
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("replicate", help="run R replications and aggregate")
    _add_config_flags(p_rep)
    p_rep.add_argument("--threads", type=int, default=1, help="parallel workers")
    p_rep.add_argument("--theta-star", type=float, help="reference estimand value")
    p_rep.add_argument("--mc-oracle-reps", type=int, default=0,
                       help="estimate theta* by Monte Carlo with this many reps")
    p_rep.add_argument("--mc-oracle-n", type=int, default=None,
                       help="n for the Monte Carlo theta* (default 4x trial n)")
    p_rep.add_argument("--save-trajectories", action="store_true",
                       help="also save replication 0's trajectories")
    p_rep.set_defaults(func=cmd_replicate)

    p_report = sub.add_parser("report", help="print table-style rows from summaries")
    p_report.add_argument("summaries", nargs="+", help="summary.json files")
    p_report.set_defaults(func=cmd_report)

    p_hist = sub.add_parser("hist", help="bin a theta.csv into a histogram CSV")
    p_hist.add_argument("theta_csv")
    p_hist.add_argument("--bins", type=int, default=30)
    p_hist.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p_hist.add_argument("--coordinate", type=int, default=0)
    p_hist.add_argument("--out", required=True)
    p_hist.set_defaults(func=cmd_hist)

    p_oracle = sub.add_parser("oracle", help="sample a limiting-law oracle to CSV")
    p_oracle.add_argument("--kind", required=True, choices=ORACLE_KINDS)
    p_oracle.add_argument("--count", type=int, default=10_000)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--eps", type=float, default=0.1,
                          help="epsilon for the threshold-rule laws")
    p_oracle.add_argument("--coordinate", type=int, default=2,
                          help="theta coordinate for the misspecified-g law")
    p_oracle.add_argument("--quad-points", type=int, default=10_000)
    p_oracle.add_argument("--finite-n", type=int, default=0,
                          help="convolve the misspecified-g law with CLT noise at this n")
    p_oracle.add_argument("--out", required=True)
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError, OracleUnavailableError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
