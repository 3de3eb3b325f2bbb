import json

import numpy as np
import pytest

from banditrep.engine import TrialConfig
from banditrep.environments import NonstationaryMabEnv, SyntheticDosageEnv
from banditrep.errors import ConfigurationError
from banditrep.estimators import EstimandSpec, NAWithReason, OracleValue
from banditrep.harness import (histogram_export, mc_theta_star,
                               read_theta_csv, replication_pairing,
                               run_replications, summary_table_values,
                               write_histogram_csv, write_summary_csv,
                               write_summary_json, write_theta_csv)
from banditrep.policies import Boltzmann, MabEpsilonGreedy

AVG = EstimandSpec(kind="average_reward")


def _trial(policy=None, n=400, T=3, seed=50):
    return TrialConfig(n=n, T=T, env=SyntheticDosageEnv(),
                       policy=policy or Boltzmann(ridge_lambda=1.0),
                       update_every=1, master_seed=seed)


def test_single_replication_summary():
    summary = run_replications(_trial(), AVG, reps=1, theta_star=0.3)
    assert summary.reps == 1
    assert summary.empirical_variance[0] == 0.0
    assert summary.thetas.shape == (1, 1)
    assert summary.coverage_standard[0] in (0.0, 1.0)


def test_parallel_matches_serial_bytes(tmp_path):
    trial = _trial(n=120)
    serial = run_replications(trial, AVG, reps=6, parallelism=1, theta_star=0.3)
    parallel = run_replications(trial, AVG, reps=6, parallelism=3, theta_star=0.3)
    np.testing.assert_array_equal(serial.thetas, parallel.thetas)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_summary_json(serial, p1)
    write_summary_json(parallel, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_aggregation_exactness():
    summary = run_replications(_trial(n=60), AVG, reps=9)
    assert summary.mean_theta_hat[0] == pytest.approx(summary.thetas.mean(), abs=1e-15)
    assert summary.empirical_variance[0] == pytest.approx(
        summary.thetas.var(ddof=1), abs=1e-15)


def test_na_propagation_for_epsilon_greedy():
    trial = TrialConfig(n=200, T=2, env=NonstationaryMabEnv(),
                        policy=MabEpsilonGreedy(0.1), update_every=1, master_seed=3)
    summary = run_replications(trial, AVG, reps=4, theta_star=-0.0625)
    assert isinstance(summary.mean_var_adaptive, NAWithReason)
    vals = summary_table_values(summary)
    assert vals["Estimated theta-hat Variance (AS)"] is None
    assert vals["Coverage (95% Interval, S)"] is not None
    encoded = summary.to_json_dict()
    assert encoded["mean_var_adaptive"] == {"na_reason": "not_differentiable"}


def test_mc_theta_star_provenance():
    oracle = mc_theta_star(_trial(n=50), AVG, reps=8, n=100)
    assert isinstance(oracle, OracleValue)
    assert oracle.se > 0
    assert "n=100" in oracle.provenance and "reps=8" in oracle.provenance


def test_snapshot_keeping():
    summary = run_replications(_trial(n=80), AVG, reps=4, keep_snapshot_times=(2, 3))
    assert set(summary.snapshots) == {2, 3}
    assert len(summary.snapshots[2]) == 4
    assert summary.snapshots[2][0]["update_time"] == 1
    assert summary.snapshots[3][0]["update_time"] == 2


# ---------------------------------------------------------------------------
# histogram
# ---------------------------------------------------------------------------


def test_histogram_identical_values():
    hist = histogram_export(np.full(10, 3.3), bins=5)
    assert hist.counts.sum() == 10
    assert (hist.counts > 0).sum() == 1


def test_histogram_counts_partition():
    stream = np.random.default_rng(1)
    values = stream.normal(size=777)
    hist = histogram_export(values, bins=13)
    assert hist.counts.sum() == 777
    assert len(hist.edges) == 14


def test_histogram_empty_input():
    hist = histogram_export([], bins=4, value_range=(0.0, 2.0))
    assert hist.counts.sum() == 0
    assert hist.edges[0] == 0.0 and hist.edges[-1] == 2.0
    with pytest.raises(ConfigurationError):
        histogram_export([1.0], bins=0)


def test_histogram_csv_round_trip(tmp_path):
    hist = histogram_export([0.1, 0.4, 0.9], bins=3, value_range=(0.0, 1.0))
    path = tmp_path / "h.csv"
    write_histogram_csv(hist, path)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "bin_left,bin_right,count"
    assert sum(int(r.split(",")[2]) for r in rows[1:]) == 3


# ---------------------------------------------------------------------------
# pairing
# ---------------------------------------------------------------------------


def test_pairing_even_odd():
    assert replication_pairing([1, 2]) == [(1, 2)]
    with pytest.warns(UserWarning, match="odd"):
        pairs = replication_pairing([1, 2, 3, 4, 5])
    assert pairs == [(1, 2), (3, 4)]
    assert replication_pairing(list(range(6))) == [(0, 1), (2, 3), (4, 5)]


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def test_theta_csv_round_trip(tmp_path):
    summary = run_replications(_trial(n=40), AVG, reps=5)
    path = tmp_path / "theta.csv"
    write_theta_csv(summary, path)
    values = read_theta_csv(path)
    np.testing.assert_array_equal(values, summary.thetas[:, 0])
    bad = tmp_path / "bad.csv"
    bad.write_text("rep,theta_0\n0,not_a_number\n")
    with pytest.raises(ConfigurationError, match="row 2"):
        read_theta_csv(bad)


def test_summary_csv_shape(tmp_path):
    summary = run_replications(_trial(n=40), AVG, reps=3, theta_star=0.3)
    path = tmp_path / "summary.csv"
    write_summary_csv(summary, path, label="demo")
    rows = path.read_text().strip().split("\n")
    assert len(rows) == 2
    header = rows[0]
    for label in ("Expected theta-hat", "Coverage (95% Interval, AS)"):
        assert label in header


def test_summary_json_parses(tmp_path):
    summary = run_replications(_trial(n=40), AVG, reps=3)
    path = tmp_path / "s.json"
    write_summary_json(summary, path)
    data = json.loads(path.read_text())
    assert data["reps"] == 3
    assert len(data["thetas"]) == 3
