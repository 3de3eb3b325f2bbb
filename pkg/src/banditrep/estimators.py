"""Post-trial inference on a TrajectorySet.

Point estimators are pooled least squares (the average-reward estimand is the
constant-feature special case). Two variance estimators: the standard sandwich
with individuals as the independent units, and the adaptive sandwich that adds
policy-gradient x influence-function corrections for the pooled updates. Both
return limiting-variance estimates V; Var(theta_hat) is estimated by V/n and
confidence intervals are theta_hat +- z*sqrt(V/n).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .engine import TrajectorySet
from .errors import (ConfigurationError, DomainError, NotDifferentiableError,
                     OracleUnavailableError, SingularMatrixError)
from .policies import Featurization, stacked_features

NOT_DIFFERENTIABLE = "not_differentiable"


@dataclass(frozen=True)
class EstimandSpec:
    """What to estimate and at what confidence level.

    kind "average_reward" regresses on a constant; "least_squares" uses the
    given featurization (optionally with the action-interaction block).
    target picks the per-cell value: the algorithm's reward or the raw outcome.
    """

    kind: str = "average_reward"
    target: str = "reward"
    featurization: Featurization = field(default_factory=Featurization)
    action_interaction: bool = True
    level: float = 0.95

    def __post_init__(self):
        if self.kind not in ("average_reward", "least_squares"):
            raise ConfigurationError(f"unknown estimand kind: {self.kind!r}")
        if self.target not in ("reward", "outcome"):
            raise ConfigurationError(f"unknown estimand target: {self.target!r}")
        if not 0 < self.level < 1:
            raise ConfigurationError(f"confidence level must lie in (0, 1): {self.level}")


def _values(trajs: TrajectorySet, spec: EstimandSpec) -> np.ndarray:
    return trajs.rewards if spec.target == "reward" else trajs.outcomes


def inference_design(trajs: TrajectorySet, spec: EstimandSpec) -> np.ndarray:
    """(n, T, d) design array of the inference model."""
    n, T = trajs.n, trajs.T
    if spec.kind == "average_reward":
        return np.ones((n, T, 1))
    c = trajs.contexts.shape[2]
    phi = spec.featurization.apply(trajs.contexts.reshape(n * T, c))
    if spec.action_interaction:
        phi = stacked_features(phi, trajs.actions.reshape(n * T))
    return phi.reshape(n, T, -1)


def average_reward_estimate(trajs: TrajectorySet, target: str = "reward") -> float:
    """(1/n) sum_i (1/T) sum_t value_{i,t}."""
    vals = trajs.rewards if target == "reward" else trajs.outcomes
    return float(vals.mean())


def least_squares_estimate(trajs: TrajectorySet, spec: EstimandSpec) -> np.ndarray:
    """Unregularized pooled least squares of the target on the inference design."""
    design = inference_design(trajs, spec)
    y = _values(trajs, spec)
    d = design.shape[2]
    flat = design.reshape(-1, d)
    gram = flat.T @ flat
    rank = np.linalg.matrix_rank(gram)
    if rank < d:
        raise SingularMatrixError(f"inference design has rank {rank} < {d}")
    return np.linalg.solve(gram, flat.T @ y.reshape(-1))


def point_estimate(trajs: TrajectorySet, spec: EstimandSpec) -> np.ndarray:
    if spec.kind == "average_reward":
        return np.array([average_reward_estimate(trajs, spec.target)])
    return least_squares_estimate(trajs, spec)


def _scores(design: np.ndarray, y: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Per-individual score sum_t phi_{i,t} (y_{i,t} - phi_{i,t}.theta) -> (n, d)."""
    resid = y - design @ theta
    return np.einsum("ntd,nt->nd", design, resid)


def _lhat(design: np.ndarray) -> np.ndarray:
    """(1/n) sum_i sum_t phi phi^T."""
    n = design.shape[0]
    flat = design.reshape(-1, design.shape[2])
    return flat.T @ flat / n


def standard_sandwich_variance(trajs: TrajectorySet, theta: np.ndarray,
                               spec: EstimandSpec) -> np.ndarray:
    """Lhat^-1 [(1/n) sum_i s_i s_i^T] Lhat^-1 with per-individual scores."""
    design = inference_design(trajs, spec)
    s = _scores(design, _values(trajs, spec), np.asarray(theta))
    lhat = _lhat(design)
    _assert_invertible(lhat)
    meat = s.T @ s / trajs.n
    inv = np.linalg.inv(lhat)
    return inv @ meat @ inv


def _assert_invertible(mat: np.ndarray):
    d = mat.shape[0]
    rank = np.linalg.matrix_rank(mat)
    if rank < d:
        raise SingularMatrixError(f"bread matrix has rank {rank} < {d}")


def psi_influence(trajs: TrajectorySet, policy) -> np.ndarray:
    """Stacked per-individual influence vectors of the pooled ridge statistics.

    For each update time tau: psi_tau(i) = M_tau^-1 sum_{t<=tau} phit_{i,t}
    (R_{i,t} - phit.beta_tau), with M_tau the per-individual-mean regularized
    Gram over data through tau. Blocks are stacked in update order -> (n, K*2d).
    """
    if not getattr(policy, "has_ls_statistic", False):
        raise NotDifferentiableError(
            f"policy {policy.kind} exposes no least-squares statistic")
    n, T = trajs.n, trajs.T
    c = trajs.contexts.shape[2]
    phi = policy.featurization.apply(trajs.contexts.reshape(n * T, c))
    tilde = stacked_features(phi, trajs.actions.reshape(n * T)).reshape(n, T, -1)
    d2 = tilde.shape[2]
    lam = policy.ridge_lambda

    by_time = {snap.update_time: k for k, snap in enumerate(trajs.snapshots)}
    K = len(trajs.snapshots)
    psi = np.empty((n, K * d2))
    gram_total = np.zeros((d2, d2))
    bi = np.zeros((n, d2))
    gi = np.zeros((n, d2, d2))
    rewards = trajs.rewards
    for t in range(1, T + 1):
        ft = tilde[:, t - 1, :]
        gram_total += ft.T @ ft
        bi += ft * rewards[:, t - 1][:, None]
        gi += np.einsum("ni,nj->nij", ft, ft)
        k = by_time.get(t)
        if k is None:
            continue
        m_hat = (gram_total + lam * np.eye(d2)) / n
        if lam == 0:
            _assert_invertible(m_hat)
        beta = trajs.snapshots[k].stacked_beta()
        resid_sum = bi - np.einsum("nij,j->ni", gi, beta)
        psi[:, k * d2:(k + 1) * d2] = np.linalg.solve(m_hat, resid_sum.T).T
    return psi


@dataclass(frozen=True)
class NAWithReason:
    """Explicit not-available marker (the tables' N/A entries)."""

    reason: str


def adaptive_sandwich_variance(trajs: TrajectorySet, theta: np.ndarray,
                               spec: EstimandSpec, policy):
    """Plug-in adaptive sandwich, or NAWithReason for non-differentiable kinds.

    Qhat_t = (1/n) sum_i [s_i / pihat_t(X,A)] gradpi_t(X,A; beta)^T, grouped by
    the governing snapshot and stacked; Sigma_AS = (1/n) sum (s - Q psi)^x2.
    """
    if not getattr(policy, "differentiable", False):
        return NAWithReason(NOT_DIFFERENTIABLE)
    design = inference_design(trajs, spec)
    theta = np.asarray(theta)
    s = _scores(design, _values(trajs, spec), theta)
    lhat = _lhat(design)
    _assert_invertible(lhat)
    n, T = trajs.n, trajs.T
    d = s.shape[1]

    if trajs.snapshots and getattr(policy, "has_ls_statistic", False):
        psi = psi_influence(trajs, policy)
        d2 = psi.shape[1] // len(trajs.snapshots)
        by_index = {snap.update_time: k for k, snap in enumerate(trajs.snapshots)}
        q = np.zeros((d, psi.shape[1]))
        for t in range(2, T + 1):
            governing = trajs.snapshot_for_time(t)
            if governing is None:
                continue
            k = by_index[governing.update_time]
            grad = policy.prob_gradient(governing, trajs.contexts[:, t - 1, :],
                                        trajs.actions[:, t - 1])
            w = s / trajs.propensities[:, t - 1][:, None]
            q[:, k * d2:(k + 1) * d2] += w.T @ grad / n
        adj = s - psi @ q.T
    else:
        adj = s   # no pooled updates: the correction is identically zero
    meat = adj.T @ adj / n
    inv = np.linalg.inv(lhat)
    return inv @ meat @ inv


def confidence_interval(theta, variance, n: int, level: float = 0.95) -> np.ndarray:
    """theta +- z_{1-alpha/2} sqrt(diag(V)/n) per coordinate -> (d, 2)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    var = np.asarray(variance, dtype=float)
    diag = np.diag(var) if var.ndim == 2 else np.atleast_1d(var)
    if np.any(diag < 0):
        raise DomainError("variance must be nonnegative")
    z = norm.ppf(0.5 + level / 2.0)
    half = z * np.sqrt(diag / n)
    return np.stack([theta - half, theta + half], axis=1)


def covers(interval: np.ndarray, theta_star) -> np.ndarray:
    """Closed-interval membership per coordinate."""
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=float))
    return (interval[:, 0] <= theta_star) & (theta_star <= interval[:, 1])


@dataclass
class EstimateReport:
    """Point estimate with both variance estimates and interval coverage."""

    theta_hat: np.ndarray
    var_standard: np.ndarray
    var_adaptive: object            # ndarray or NAWithReason
    ci_standard: np.ndarray
    ci_adaptive: object             # ndarray or NAWithReason
    n: int
    level: float
    theta_star: object = None
    covered_standard: object = None
    covered_adaptive: object = None

    def to_json_dict(self) -> dict:
        def enc_var(v):
            if isinstance(v, NAWithReason):
                return {"na_reason": v.reason}
            return np.asarray(v).tolist()
        out = {
            "theta_hat": self.theta_hat.tolist(),
            "var_standard": enc_var(self.var_standard),
            "var_adaptive": enc_var(self.var_adaptive),
            "ci_standard": self.ci_standard.tolist(),
            "ci_adaptive": enc_var(self.ci_adaptive),
            "n": self.n,
            "level": self.level,
        }
        if self.theta_star is not None:
            out["theta_star"] = np.atleast_1d(self.theta_star).tolist()
            out["covered_standard"] = np.asarray(self.covered_standard).tolist()
            out["covered_adaptive"] = enc_var(self.covered_adaptive)
        return out


def estimate_report(trajs: TrajectorySet, spec: EstimandSpec, policy,
                    theta_star=None) -> EstimateReport:
    """Full inference pass for one trial."""
    theta = point_estimate(trajs, spec)
    var_s = standard_sandwich_variance(trajs, theta, spec)
    var_as = adaptive_sandwich_variance(trajs, theta, spec, policy)
    ci_s = confidence_interval(theta, var_s, trajs.n, spec.level)
    if isinstance(var_as, NAWithReason):
        ci_as = var_as
    else:
        ci_as = confidence_interval(theta, var_as, trajs.n, spec.level)
    report = EstimateReport(theta_hat=theta, var_standard=var_s, var_adaptive=var_as,
                            ci_standard=ci_s, ci_adaptive=ci_as, n=trajs.n,
                            level=spec.level)
    if theta_star is not None:
        report.theta_star = theta_star
        report.covered_standard = covers(ci_s, theta_star)
        report.covered_adaptive = (ci_as if isinstance(ci_as, NAWithReason)
                                   else covers(ci_as, theta_star))
    return report


# ---------------------------------------------------------------------------
# Replicability diagnostic and reference values
# ---------------------------------------------------------------------------


def replicability_metric(snapshot_pairs, context_grid, policy) -> float:
    """Mean over pairs of sup over grid contexts and actions of |pi - pi~|.

    For binary actions the two action gaps coincide, so the sup runs over the
    action-1 probabilities.
    """
    grid = np.atleast_2d(np.asarray(context_grid, dtype=float))
    if grid.shape[0] == 0:
        raise DomainError("context grid must be non-empty")
    gaps = []
    for left, right in snapshot_pairs:
        p_left = np.asarray(policy.probs(left, grid))
        p_right = np.asarray(policy.probs(right, grid))
        gaps.append(float(np.max(np.abs(p_left - p_right))))
    if not gaps:
        raise DomainError("no snapshot pairs supplied")
    return float(np.mean(gaps))


@dataclass(frozen=True)
class OracleValue:
    """A reference estimand value with its provenance and MC uncertainty."""

    value: float
    se: float
    provenance: str


def theta_star_nonstationary(mu0: float = 0.0, deltas=(0.0, -0.25)) -> OracleValue:
    """Limiting average reward in the two-period environment.

    E[pi_2(1)] = 0.5 for both the threshold and the posterior-probability
    algorithms, so theta* = mu0 + (delta_1 + delta_2)/4 analytically.
    """
    if len(deltas) != 2:
        raise OracleUnavailableError("analytic value defined for the T=2 trend only")
    return OracleValue(value=mu0 + 0.25 * (deltas[0] + deltas[1]), se=0.0,
                       provenance="analytic")


def theta_star_oracle(env, policy) -> OracleValue:
    """Analytic reference where one exists; otherwise explicitly unavailable."""
    if env.kind == "nonstationary_mab" and policy.kind in ("mab_epsilon_greedy",
                                                           "gaussian_thompson"):
        return theta_star_nonstationary(env.mu0, env.deltas)
    raise OracleUnavailableError(
        f"no analytic reference for env={env.kind}, policy={policy.kind}; "
        "use the harness Monte Carlo oracle")
