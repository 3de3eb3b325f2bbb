"""Single-trial simulation: n individuals, T decision times, pooled updates.

The first decision is always Bernoulli(0.5). After each decision time t that
falls on the update cadence (and is not the last), the policy statistic is
refit on all pooled data so far and used from t+1 onward. All randomness comes
from streams derived per (replication, role, decision time), so a trial is a
pure function of its config.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .policies import PolicySnapshot, select_actions
from .rng import StreamFactory


@dataclass(frozen=True)
class TrialConfig:
    """Everything that determines one simulated trial."""

    n: int
    T: int
    env: object
    policy: object
    update_every: int = 1
    master_seed: int = 0
    replication_index: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1: {self.n}")
        if self.T < 1:
            raise ConfigurationError(f"T must be >= 1: {self.T}")
        if not 1 <= self.update_every <= self.T:
            raise ConfigurationError(
                f"update_every must lie in [1, T]: {self.update_every} (T={self.T})")

    def with_replication(self, r: int) -> "TrialConfig":
        return TrialConfig(self.n, self.T, self.env, self.policy,
                           self.update_every, self.master_seed, r)


@dataclass
class TrajectorySet:
    """Complete record of one trial, indexed (individual, decision time)."""

    contexts: np.ndarray        # (n, T, c)
    actions: np.ndarray         # (n, T) in {0, 1}
    propensities: np.ndarray    # (n, T), probability of the realized action
    probs1: np.ndarray          # (n, T), probability of action 1
    outcomes: np.ndarray        # (n, T)
    rewards: np.ndarray         # (n, T)
    snapshots: list             # PolicySnapshot, ordered by update_time
    config: TrialConfig

    @property
    def n(self) -> int:
        return self.rewards.shape[0]

    @property
    def T(self) -> int:
        return self.rewards.shape[1]

    def snapshot_for_time(self, t: int):
        """The snapshot governing decisions at time t (None before the first fit)."""
        governing = None
        for snap in self.snapshots:
            if snap.update_time <= t - 1:
                governing = snap
            else:
                break
        return governing


def _check_compatible(env, policy):
    contextual = getattr(policy, "has_ls_statistic", False)
    if contextual and env.context_dim < 1:
        raise ConfigurationError(
            f"policy {policy.kind} needs contexts; env {env.kind} has none")


def run_trial(config: TrialConfig) -> TrajectorySet:
    """Simulate one trial; deterministic given the config."""
    _check_compatible(config.env, config.policy)
    n, T = config.n, config.T
    streams = StreamFactory(config.master_seed, config.replication_index)
    runtime = config.env.build(n, T, streams)
    policy = config.policy
    acc = policy.make_accumulator(config.env.context_dim)

    c = config.env.context_dim
    contexts = np.zeros((n, T, c))
    actions = np.zeros((n, T), dtype=np.int8)
    propensities = np.zeros((n, T))
    probs1 = np.zeros((n, T))
    outcomes = np.zeros((n, T))
    rewards = np.zeros((n, T))
    snapshots: list = []
    current: PolicySnapshot | None = None

    for t in range(1, T + 1):
        ctx = runtime.contexts(t)
        # adaptive kinds answer 0.5 while no snapshot exists (the initial policy)
        p1 = np.broadcast_to(np.asarray(policy.probs(current, ctx)), (n,))
        acts, props = select_actions(p1, streams.stream("policy", t))
        outcome, reward = runtime.step(t, acts)

        contexts[:, t - 1, :] = ctx
        actions[:, t - 1] = acts
        propensities[:, t - 1] = props
        probs1[:, t - 1] = p1
        outcomes[:, t - 1] = outcome
        rewards[:, t - 1] = reward

        if acc is not None:
            phi_or_ctx = ctx
            if policy.has_ls_statistic:
                phi_or_ctx = policy.featurization.apply(ctx)
            acc.update(phi_or_ctx, acts, reward)
        if t % config.update_every == 0 and t < T:
            snap = policy.fit(acc, update_time=t)
            if snap is not None:
                snapshots.append(snap)
                current = snap

    return TrajectorySet(contexts=contexts, actions=actions, propensities=propensities,
                         probs1=probs1, outcomes=outcomes, rewards=rewards,
                         snapshots=snapshots, config=config)


def summarize_trial(trajs: TrajectorySet) -> dict:
    """Aggregate diagnostics: mean reward, per-time action rate, final snapshot."""
    return {
        "mean_reward": float(trajs.rewards.mean()),
        "mean_outcome": float(trajs.outcomes.mean()),
        "action1_frequency_per_t": trajs.actions.mean(axis=0).tolist(),
        "final_snapshot": snapshot_to_dict(trajs.snapshots[-1]) if trajs.snapshots else None,
    }


# ---------------------------------------------------------------------------
# Serialization: columnar CSV + JSON snapshot sidecar, bit-exact round trip
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def snapshot_to_dict(snap: PolicySnapshot) -> dict:
    return {
        "update_time": snap.update_time,
        "beta0": list(snap.beta0),
        "beta1": list(snap.beta1),
        "gram": [list(row) for row in snap.gram],
        "extras": [[k, v] for k, v in snap.extras],
    }


def snapshot_from_dict(d: dict) -> PolicySnapshot:
    """Inverse of snapshot_to_dict; also accepts slim (gram-free) dicts."""
    return PolicySnapshot(update_time=d["update_time"],
                          beta0=tuple(d.get("beta0", ())),
                          beta1=tuple(d.get("beta1", ())),
                          gram=tuple(map(tuple, d.get("gram", ()))),
                          extras=tuple((k, v) for k, v in d.get("extras", ())))


def save_trajectories(trajs: TrajectorySet, csv_path, snapshot_path=None):
    """One CSV row per (individual, time); floats written via repr for exactness."""
    n, T, c = trajs.contexts.shape
    rep = trajs.config.replication_index
    with open(csv_path, "w") as fh:
        ctx_cols = ",".join(f"context_{j}" for j in range(c))
        header = "rep,i,t" + ("," + ctx_cols if c else "") \
            + ",action,propensity,outcome,reward\n"
        fh.write(header)
        for i in range(n):
            for t in range(T):
                parts = [str(rep), str(i), str(t + 1)]
                parts += [_fmt(v) for v in trajs.contexts[i, t]]
                parts += [str(int(trajs.actions[i, t])),
                          _fmt(trajs.propensities[i, t]),
                          _fmt(trajs.outcomes[i, t]),
                          _fmt(trajs.rewards[i, t])]
                fh.write(",".join(parts) + "\n")
    if snapshot_path is not None:
        with open(snapshot_path, "w") as fh:
            json.dump([snapshot_to_dict(s) for s in trajs.snapshots], fh, indent=1)


def load_trajectories(csv_path, snapshot_path=None, config: TrialConfig | None = None):
    """Inverse of save_trajectories (config is not stored in the files)."""
    rows = Path(csv_path).read_text().strip().split("\n")
    header = rows[0].split(",")
    c = sum(1 for h in header if h.startswith("context_"))
    data = [r.split(",") for r in rows[1:]]
    n = max(int(r[1]) for r in data) + 1
    T = max(int(r[2]) for r in data)
    contexts = np.zeros((n, T, c))
    actions = np.zeros((n, T), dtype=np.int8)
    propensities = np.zeros((n, T))
    outcomes = np.zeros((n, T))
    rewards = np.zeros((n, T))
    for r in data:
        i, t = int(r[1]), int(r[2]) - 1
        contexts[i, t] = [float(v) for v in r[3:3 + c]]
        actions[i, t] = int(r[3 + c])
        propensities[i, t] = float(r[4 + c])
        outcomes[i, t] = float(r[5 + c])
        rewards[i, t] = float(r[6 + c])
    snapshots = []
    if snapshot_path is not None:
        with open(snapshot_path) as fh:
            snapshots = [snapshot_from_dict(d) for d in json.load(fh)]
    probs1 = np.where(actions == 1, propensities, 1.0 - propensities)
    return TrajectorySet(contexts=contexts, actions=actions, propensities=propensities,
                         probs1=probs1, outcomes=outcomes, rewards=rewards,
                         snapshots=snapshots, config=config)
