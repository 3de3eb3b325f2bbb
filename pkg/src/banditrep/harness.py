"""Replication orchestration and aggregation.

Replications are embarrassingly parallel: replication r derives every stream
from (master_seed, r), so results are independent of worker count and order.
Aggregation walks replication indices in order, which makes summaries (and
their serialized bytes) invariant to the parallelism degree.
"""
from __future__ import annotations

import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import TrialConfig, run_trial
from .errors import ConfigurationError
from .estimators import (EstimandSpec, NAWithReason, OracleValue, estimate_report,
                         point_estimate)


def _slim_snapshot(snap) -> dict:
    if snap is None:
        return None
    return {"update_time": snap.update_time, "beta0": list(snap.beta0),
            "beta1": list(snap.beta1), "extras": [[k, v] for k, v in snap.extras]}


def _run_one(args):
    trial, estimand, rep, theta_star_value, keep_times, estimates_only = args
    cfg = trial.with_replication(rep)
    trajs = run_trial(cfg)
    kept = {t: _slim_snapshot(trajs.snapshot_for_time(t)) for t in keep_times}
    if estimates_only:
        theta = point_estimate(trajs, estimand)
        return {"rep": rep, "theta": theta.tolist(), "snapshots": kept}
    report = estimate_report(trajs, estimand, trial.policy, theta_star=theta_star_value)
    out = {
        "rep": rep,
        "theta": report.theta_hat.tolist(),
        "var_standard": np.diag(report.var_standard).tolist(),
        "snapshots": kept,
    }
    if isinstance(report.var_adaptive, NAWithReason):
        out["var_adaptive"] = None
        out["na_reason"] = report.var_adaptive.reason
    else:
        out["var_adaptive"] = np.diag(report.var_adaptive).tolist()
    if theta_star_value is not None:
        out["covered_standard"] = np.asarray(report.covered_standard).astype(int).tolist()
        if isinstance(report.covered_adaptive, NAWithReason):
            out["covered_adaptive"] = None
        else:
            out["covered_adaptive"] = np.asarray(report.covered_adaptive).astype(int).tolist()
    return out


@dataclass
class ReplicationSummary:
    """Aggregates over R independent replications of one trial config."""

    reps: int
    n: int
    T: int
    env_kind: str
    policy_kind: str
    master_seed: int
    thetas: np.ndarray                  # (R, d)
    mean_theta_hat: np.ndarray          # (d,)
    empirical_variance: np.ndarray      # (d,), across replications
    mean_var_standard: np.ndarray       # (d,), on the Var(theta_hat) scale (V/n)
    mean_var_adaptive: object           # same, or NAWithReason
    coverage_standard: object           # (d,) or None when theta* unknown
    coverage_adaptive: object           # (d,), NAWithReason, or None
    theta_star: object                  # OracleValue or None
    snapshots: object = None            # {time: [per-rep slim snapshot]} when kept
    wall_time_s: float = 0.0

    def to_json_dict(self) -> dict:
        def enc(v):
            if v is None:
                return None
            if isinstance(v, NAWithReason):
                return {"na_reason": v.reason}
            return np.asarray(v).tolist()
        out = {
            "reps": self.reps,
            "n": self.n,
            "T": self.T,
            "env_kind": self.env_kind,
            "policy_kind": self.policy_kind,
            "master_seed": self.master_seed,
            "mean_theta_hat": enc(self.mean_theta_hat),
            "empirical_variance": enc(self.empirical_variance),
            "mean_var_standard": enc(self.mean_var_standard),
            "mean_var_adaptive": enc(self.mean_var_adaptive),
            "coverage_standard": enc(self.coverage_standard),
            "coverage_adaptive": enc(self.coverage_adaptive),
            "theta_star": None if self.theta_star is None else {
                "value": self.theta_star.value,
                "se": self.theta_star.se,
                "provenance": self.theta_star.provenance,
            },
            "thetas": enc(self.thetas),
        }
        if self.snapshots is not None:
            out["snapshots"] = {str(k): v for k, v in self.snapshots.items()}
        return out


def run_replications(trial: TrialConfig, estimand: EstimandSpec, reps: int,
                     parallelism: int = 1, theta_star=None,
                     keep_snapshot_times: tuple = (),
                     estimates_only: bool = False) -> ReplicationSummary:
    """R independent replications with indices 0..R-1, aggregated exactly."""
    if reps < 1:
        raise ConfigurationError(f"reps must be >= 1: {reps}")
    theta_star_value = theta_star.value if isinstance(theta_star, OracleValue) else theta_star
    t0 = time.time()
    jobs = [(trial, estimand, r, theta_star_value, tuple(keep_snapshot_times),
             estimates_only) for r in range(reps)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, reps // (4 * parallelism))))
    else:
        results = [_run_one(job) for job in jobs]
    results.sort(key=lambda r: r["rep"])

    thetas = np.array([r["theta"] for r in results])
    d = thetas.shape[1]
    n = trial.n
    mean_theta = thetas.mean(axis=0)
    emp_var = thetas.var(axis=0, ddof=1) if reps > 1 else np.zeros(d)

    if estimates_only:
        mean_var_s = np.full(d, np.nan)
        mean_var_as = None
        cov_s = cov_as = None
    else:
        mean_var_s = np.mean([r["var_standard"] for r in results], axis=0) / n
        if results[0]["var_adaptive"] is None:
            mean_var_as = NAWithReason(results[0]["na_reason"])
        else:
            mean_var_as = np.mean([r["var_adaptive"] for r in results], axis=0) / n
        cov_s = cov_as = None
        if theta_star_value is not None:
            cov_s = np.mean([r["covered_standard"] for r in results], axis=0)
            if results[0].get("covered_adaptive") is None:
                cov_as = (mean_var_as if isinstance(mean_var_as, NAWithReason) else None)
            else:
                cov_as = np.mean([r["covered_adaptive"] for r in results], axis=0)

    kept = None
    if keep_snapshot_times:
        kept = {t: [r["snapshots"][t] for r in results] for t in keep_snapshot_times}

    star = theta_star if isinstance(theta_star, OracleValue) else (
        None if theta_star is None else OracleValue(float(theta_star), 0.0, "given"))
    return ReplicationSummary(
        reps=reps, n=n, T=trial.T, env_kind=trial.env.kind,
        policy_kind=trial.policy.kind, master_seed=trial.master_seed,
        thetas=thetas, mean_theta_hat=mean_theta, empirical_variance=emp_var,
        mean_var_standard=mean_var_s, mean_var_adaptive=mean_var_as,
        coverage_standard=cov_s, coverage_adaptive=cov_as, theta_star=star,
        snapshots=kept, wall_time_s=time.time() - t0)


MC_ORACLE_SEED_OFFSET = 1_000_003       # keeps oracle replications disjoint


def mc_theta_star(trial: TrialConfig, estimand: EstimandSpec, reps: int,
                  n: int | None = None, parallelism: int = 1,
                  coordinate: int = 0) -> OracleValue:
    """Monte Carlo estimand reference: mean theta-hat at a larger n.

    Runs under a shifted master seed so oracle draws are independent of any
    same-seed experiment runs.
    """
    n_oracle = n if n is not None else 4 * trial.n
    cfg = TrialConfig(n=n_oracle, T=trial.T, env=trial.env, policy=trial.policy,
                      update_every=trial.update_every,
                      master_seed=trial.master_seed + MC_ORACLE_SEED_OFFSET)
    summary = run_replications(cfg, estimand, reps, parallelism=parallelism,
                               estimates_only=True)
    value = float(summary.mean_theta_hat[coordinate])
    se = float(np.sqrt(summary.empirical_variance[coordinate] / reps))
    return OracleValue(value=value, se=se,
                       provenance=f"mc(n={n_oracle}, reps={reps})")


# ---------------------------------------------------------------------------
# Histograms and pairing
# ---------------------------------------------------------------------------


@dataclass
class Histogram:
    """Equal-width binned table; counts sum to the number of input values."""

    edges: np.ndarray        # (bins+1,)
    counts: np.ndarray       # (bins,)

    def csv_rows(self) -> list:
        return [(self.edges[i], self.edges[i + 1], int(self.counts[i]))
                for i in range(len(self.counts))]


def histogram_export(values, bins: int, value_range=None) -> Histogram:
    """Equal-width bins over the given or data range, edges emitted explicitly."""
    if bins < 1:
        raise ConfigurationError(f"bins must be >= 1: {bins}")
    values = np.asarray(values, dtype=float).ravel()
    if value_range is None:
        value_range = (float(values.min()), float(values.max())) if values.size \
            else (0.0, 1.0)
    counts, edges = np.histogram(values, bins=bins, range=value_range)
    return Histogram(edges=edges, counts=counts)


def replication_pairing(items: list) -> list:
    """Deterministic (2k, 2k+1) pairing; an odd tail is dropped with a warning."""
    if len(items) % 2 == 1:
        warnings.warn("odd replication count: dropping the last replication from pairing")
        items = items[:-1]
    return [(items[2 * k], items[2 * k + 1]) for k in range(len(items) // 2)]


# ---------------------------------------------------------------------------
# File outputs
# ---------------------------------------------------------------------------

TABLE_ROW_LABELS = (
    "Expected theta-hat",
    "Empirical theta-hat Variance",
    "Estimated theta-hat Variance (AS)",
    "Estimated theta-hat Variance (S)",
    "Coverage (95% Interval, AS)",
    "Coverage (95% Interval, S)",
)


def summary_table_values(summary: ReplicationSummary, coordinate: int = 0) -> dict:
    """The six table-style values for one summary (N/A encoded as None)."""
    def pick(v):
        if v is None or isinstance(v, NAWithReason):
            return None
        return float(np.atleast_1d(v)[coordinate])
    return {
        TABLE_ROW_LABELS[0]: pick(summary.mean_theta_hat),
        TABLE_ROW_LABELS[1]: pick(summary.empirical_variance),
        TABLE_ROW_LABELS[2]: pick(summary.mean_var_adaptive),
        TABLE_ROW_LABELS[3]: pick(summary.mean_var_standard),
        TABLE_ROW_LABELS[4]: pick(summary.coverage_adaptive),
        TABLE_ROW_LABELS[5]: pick(summary.coverage_standard),
    }


def write_summary_json(summary: ReplicationSummary, path):
    with open(path, "w") as fh:
        json.dump(summary.to_json_dict(), fh, indent=1)


def write_summary_csv(summary: ReplicationSummary, path, label: str = ""):
    """One flat row per config, mirroring the table row labels."""
    vals = summary_table_values(summary)
    cols = ["label", "env", "policy", "n", "T", "reps"] + list(TABLE_ROW_LABELS)
    row = [label or summary.policy_kind, summary.env_kind, summary.policy_kind,
           str(summary.n), str(summary.T), str(summary.reps)]
    row += ["N/A" if vals[k] is None else repr(vals[k]) for k in TABLE_ROW_LABELS]
    with open(path, "w") as fh:
        fh.write(",".join(f'"{c}"' if "," in c else c for c in cols) + "\n")
        fh.write(",".join(f'"{c}"' if "," in c else c for c in row) + "\n")


def write_theta_csv(summary: ReplicationSummary, path):
    d = summary.thetas.shape[1]
    with open(path, "w") as fh:
        fh.write("rep," + ",".join(f"theta_{j}" for j in range(d)) + "\n")
        for r in range(summary.reps):
            fh.write(str(r) + "," + ",".join(repr(float(v)) for v in summary.thetas[r]) + "\n")


def write_histogram_csv(hist: Histogram, path):
    with open(path, "w") as fh:
        fh.write("bin_left,bin_right,count\n")
        for left, right, count in hist.csv_rows():
            fh.write(f"{repr(float(left))},{repr(float(right))},{count}\n")


def read_theta_csv(path, coordinate: int = 0) -> np.ndarray:
    """First (or requested) theta coordinate per replication."""
    rows = open(path).read().strip().split("\n")
    header = rows[0].split(",")
    col = header.index(f"theta_{coordinate}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        parts = row.split(",")
        try:
            out.append(float(parts[col]))
        except (ValueError, IndexError):
            raise ConfigurationError(f"{path}: row {lineno}: cannot parse theta value")
    return np.array(out)
