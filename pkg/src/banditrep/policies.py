"""Bandit algorithms: pooled statistics, action-probability maps, gradients.

A policy config builds a per-trial accumulator that consumes pooled data step
by step and emits immutable PolicySnapshots at update times. Probability maps
are pure functions of (snapshot, context), so recorded propensities can be
re-evaluated after the trial.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .environments import sigmoid
from .errors import (ConfigurationError, DomainError, NotDifferentiableError,
                     SingularMatrixError)

# ---------------------------------------------------------------------------
# Featurization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Featurization:
    """Maps raw context vectors to policy features.

    "intercept": prepend a 1 column; "identity": contexts already carry one.
    """

    mode: str = "intercept"

    def __post_init__(self):
        if self.mode not in ("intercept", "identity"):
            raise ConfigurationError(f"unknown featurization mode: {self.mode!r}")

    def dim(self, context_dim: int) -> int:
        return context_dim + (1 if self.mode == "intercept" else 0)

    def apply(self, contexts: np.ndarray) -> np.ndarray:
        contexts = np.atleast_2d(contexts)
        if self.mode == "identity":
            return contexts
        ones = np.ones((contexts.shape[0], 1))
        return np.concatenate([ones, contexts], axis=1)


def stacked_features(phi: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """[phi, a*phi]: the regression features of the pooled ridge criterion."""
    return np.concatenate([phi, np.asarray(actions, dtype=float)[:, None] * phi], axis=1)


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicySnapshot:
    """The algorithm statistic at one update time, as used for later decisions."""

    update_time: int
    beta0: tuple = ()
    beta1: tuple = ()
    gram: tuple = ()          # regularized Gram used in the solve, row-major
    extras: tuple = ()        # kind-specific (key, value) pairs

    def extra(self, key: str) -> float:
        for k, v in self.extras:
            if k == key:
                return v
        raise KeyError(key)

    def beta1_array(self) -> np.ndarray:
        return np.asarray(self.beta1)

    def stacked_beta(self) -> np.ndarray:
        return np.concatenate([self.beta0, self.beta1])


# ---------------------------------------------------------------------------
# Probability primitives
# ---------------------------------------------------------------------------


def mab_diff_statistic(actions, rewards) -> float:
    """Arm-1 mean reward minus arm-0 mean reward; an empty arm contributes 0."""
    a = np.asarray(actions, dtype=float)
    r = np.asarray(rewards, dtype=float)
    n1 = a.sum()
    n0 = a.size - n1
    m1 = float(r[a == 1].mean()) if n1 > 0 else 0.0
    m0 = float(r[a == 0].mean()) if n0 > 0 else 0.0
    return m1 - m0


def mab_epsilon_greedy_prob(beta_hat: float, eps: float) -> float:
    """1 - eps/2 when the statistic is strictly positive, else eps/2."""
    if not 0 < eps < 1:
        raise ConfigurationError(f"epsilon must lie in (0, 1): {eps}")
    return 1.0 - eps / 2.0 if beta_hat > 0 else eps / 2.0


def gaussian_ts_posterior(actions, rewards, prior_mean: float = 0.0,
                          prior_var: float = 1.0, noise_var: float = 1.0) -> dict:
    """Conjugate normal update per arm with known noise variance."""
    a = np.asarray(actions, dtype=float)
    r = np.asarray(rewards, dtype=float)
    post = {}
    for arm in (0, 1):
        sel = a == arm
        n_arm = int(sel.sum())
        var = 1.0 / (1.0 / prior_var + n_arm / noise_var)
        mean = var * (prior_mean / prior_var + r[sel].sum() / noise_var)
        post[f"mean_{arm}"] = mean
        post[f"var_{arm}"] = var
    return post


def ts_prob_superior(post: dict) -> float:
    """P(mu_1 > mu_0) = Phi((m1-m0)/sqrt(v1+v0)) for the Gaussian posterior."""
    v = post["var_1"] + post["var_0"]
    if v <= 0:
        raise DomainError("posterior variances must be positive")
    return float(norm.cdf((post["mean_1"] - post["mean_0"]) / np.sqrt(v)))


def contextual_eps_greedy_prob(phi_x: np.ndarray, beta1: np.ndarray, eps: float):
    """1 - eps/2 where phi(x).beta1 > 0 (strict), else eps/2."""
    if not 0 < eps < 1:
        raise ConfigurationError(f"epsilon must lie in (0, 1): {eps}")
    phi_x = np.atleast_2d(phi_x)
    beta1 = np.asarray(beta1, dtype=float)
    if phi_x.shape[1] != beta1.shape[0]:
        raise DomainError(f"feature dim {phi_x.shape[1]} != beta dim {beta1.shape[0]}")
    u = phi_x @ beta1
    return np.where(u > 0, 1.0 - eps / 2.0, eps / 2.0)


def boltzmann_prob(phi_x: np.ndarray, beta1: np.ndarray, pi_min: float, s: float):
    """pi_min + (1 - 2*pi_min) * sigmoid(s * phi(x).beta1)."""
    if not 0 < pi_min < 0.5:
        raise ConfigurationError(f"pi_min must lie in (0, 0.5): {pi_min}")
    if s <= 0:
        raise ConfigurationError(f"steepness must be > 0: {s}")
    phi_x = np.atleast_2d(phi_x)
    u = s * (phi_x @ np.asarray(beta1, dtype=float))
    return pi_min + (1.0 - 2.0 * pi_min) * sigmoid(u)


def boltzmann_prob_gradient(phi_x: np.ndarray, beta1: np.ndarray, pi_min: float,
                            s: float, action=1):
    """d pi(x, a) / d beta1; the action-0 gradient is the negative of action-1's."""
    if not 0 < pi_min < 0.5:
        raise ConfigurationError(f"pi_min must lie in (0, 0.5): {pi_min}")
    if s <= 0:
        raise ConfigurationError(f"steepness must be > 0: {s}")
    phi_x = np.atleast_2d(phi_x)
    u = s * (phi_x @ np.asarray(beta1, dtype=float))
    sig = sigmoid(u)
    base = (1.0 - 2.0 * pi_min) * s * sig * (1.0 - sig)
    sign = 2.0 * np.asarray(action, dtype=float) - 1.0
    return (sign * base)[:, None] * phi_x


def ridge_ls_solve(gram: np.ndarray, moment: np.ndarray, lam: float) -> np.ndarray:
    """Solve (gram + lam*I) beta = moment; lam=0 requires full rank."""
    if lam < 0:
        raise ConfigurationError(f"ridge lambda must be >= 0: {lam}")
    d = gram.shape[0]
    system = gram + lam * np.eye(d)
    if lam == 0:
        rank = np.linalg.matrix_rank(system)
        if rank < d:
            raise SingularMatrixError(
                f"unregularized normal equations are rank {rank} < {d}")
    return np.linalg.solve(system, moment)


def select_actions(probs: np.ndarray, stream: np.random.Generator):
    """Bernoulli draws plus the propensity of the realized action."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or np.any(probs > 1):
        raise DomainError("action probabilities must lie in [0, 1]")
    actions = (stream.random(probs.shape) < probs).astype(np.int8)
    propensities = np.where(actions == 1, probs, 1.0 - probs)
    return actions, propensities


# ---------------------------------------------------------------------------
# Policy kinds
# ---------------------------------------------------------------------------


class _ArmMeansAccumulator:
    def __init__(self):
        self.sum = np.zeros(2)
        self.count = np.zeros(2)

    def update(self, contexts, actions, rewards):
        a = np.asarray(actions)
        r = np.asarray(rewards, dtype=float)
        for arm in (0, 1):
            sel = a == arm
            self.sum[arm] += r[sel].sum()
            self.count[arm] += sel.sum()


@dataclass(frozen=True)
class MabEpsilonGreedy:
    """Epsilon-greedy on the difference of arm means; context-free."""

    eps: float = 0.1

    kind = "mab_epsilon_greedy"
    differentiable = False
    has_ls_statistic = False

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ConfigurationError(f"epsilon must lie in (0, 1): {self.eps}")

    def make_accumulator(self, context_dim: int):
        return _ArmMeansAccumulator()

    def fit(self, acc, update_time: int) -> PolicySnapshot:
        means = [acc.sum[a] / acc.count[a] if acc.count[a] > 0 else 0.0 for a in (0, 1)]
        return PolicySnapshot(update_time=update_time,
                              extras=(("beta_hat", means[1] - means[0]),))

    def probs(self, snapshot, contexts) -> np.ndarray:
        n = np.atleast_2d(contexts).shape[0]
        if snapshot is None:
            return np.full(n, 0.5)
        p = mab_epsilon_greedy_prob(snapshot.extra("beta_hat"), self.eps)
        return np.full(n, p)

    def prob_gradient(self, snapshot, contexts, actions):
        raise NotDifferentiableError("epsilon-greedy probabilities are threshold rules")


@dataclass(frozen=True)
class GaussianThompson:
    """Thompson sampling with a conjugate Gaussian model per arm; context-free."""

    prior_mean: float = 0.0
    prior_var: float = 1.0
    noise_var: float = 1.0

    kind = "gaussian_thompson"
    differentiable = False
    has_ls_statistic = False

    def make_accumulator(self, context_dim: int):
        return _ArmMeansAccumulator()

    def fit(self, acc, update_time: int) -> PolicySnapshot:
        extras = []
        for arm in (0, 1):
            var = 1.0 / (1.0 / self.prior_var + acc.count[arm] / self.noise_var)
            mean = var * (self.prior_mean / self.prior_var + acc.sum[arm] / self.noise_var)
            extras += [(f"mean_{arm}", mean), (f"var_{arm}", var)]
        return PolicySnapshot(update_time=update_time, extras=tuple(extras))

    def probs(self, snapshot, contexts) -> np.ndarray:
        n = np.atleast_2d(contexts).shape[0]
        if snapshot is None:
            return np.full(n, 0.5)
        post = dict(snapshot.extras)
        return np.full(n, ts_prob_superior(post))

    def prob_gradient(self, snapshot, contexts, actions):
        raise NotDifferentiableError("Thompson sampling exposes no least-squares statistic")


class _RidgeAccumulator:
    def __init__(self, dim: int):
        self.gram = np.zeros((2 * dim, 2 * dim))
        self.moment = np.zeros(2 * dim)

    def update(self, phi, actions, rewards):
        tilde = stacked_features(phi, actions)
        self.gram += tilde.T @ tilde
        self.moment += tilde.T @ np.asarray(rewards, dtype=float)


@dataclass(frozen=True)
class _ContextualLsPolicy:
    """Shared ridge-statistic machinery for the contextual kinds."""

    featurization: Featurization = field(default_factory=Featurization)
    ridge_lambda: float = 0.0

    has_ls_statistic = True

    def make_accumulator(self, context_dim: int):
        return _RidgeAccumulator(self.featurization.dim(context_dim))

    def fit(self, acc, update_time: int) -> PolicySnapshot:
        beta = ridge_ls_solve(acc.gram, acc.moment, self.ridge_lambda)
        d = beta.shape[0] // 2
        return PolicySnapshot(update_time=update_time,
                              beta0=tuple(beta[:d]), beta1=tuple(beta[d:]),
                              gram=tuple(map(tuple, acc.gram)))

    def _phi(self, contexts) -> np.ndarray:
        return self.featurization.apply(contexts)


@dataclass(frozen=True)
class ContextualEpsGreedy(_ContextualLsPolicy):
    """Threshold rule on the fitted advantage phi(x).beta1."""

    eps: float = 0.2

    kind = "contextual_epsilon_greedy"
    differentiable = False

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ConfigurationError(f"epsilon must lie in (0, 1): {self.eps}")

    def probs(self, snapshot, contexts) -> np.ndarray:
        phi = self._phi(contexts)
        if snapshot is None:
            return np.full(phi.shape[0], 0.5)
        return contextual_eps_greedy_prob(phi, snapshot.beta1_array(), self.eps)

    def prob_gradient(self, snapshot, contexts, actions):
        raise NotDifferentiableError("epsilon-greedy probabilities are threshold rules")


@dataclass(frozen=True)
class Boltzmann(_ContextualLsPolicy):
    """Softmax exploration over the fitted advantage; differentiable in beta."""

    pi_min: float = 0.1
    steepness: float = 2.0

    kind = "boltzmann"
    differentiable = True

    def __post_init__(self):
        if not 0 < self.pi_min < 0.5:
            raise ConfigurationError(f"pi_min must lie in (0, 0.5): {self.pi_min}")
        if self.steepness <= 0:
            raise ConfigurationError(f"steepness must be > 0: {self.steepness}")

    def probs(self, snapshot, contexts) -> np.ndarray:
        phi = self._phi(contexts)
        if snapshot is None:
            return np.full(phi.shape[0], 0.5)
        return boltzmann_prob(phi, snapshot.beta1_array(), self.pi_min, self.steepness)

    def prob_gradient(self, snapshot, contexts, actions) -> np.ndarray:
        """Gradient wrt the stacked [beta0, beta1]; the beta0 block is zero."""
        phi = self._phi(contexts)
        g1 = boltzmann_prob_gradient(phi, snapshot.beta1_array(), self.pi_min,
                                     self.steepness, actions)
        return np.concatenate([np.zeros_like(g1), g1], axis=1)


@dataclass(frozen=True)
class FixedProb:
    """Non-adaptive reference policy: P(A=1) = p at every decision time."""

    p: float = 0.5

    kind = "fixed_prob"
    differentiable = True      # trivially, with an identically-zero gradient
    has_ls_statistic = False

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ConfigurationError(f"fixed probability must lie in [0, 1]: {self.p}")

    def make_accumulator(self, context_dim: int):
        return None

    def fit(self, acc, update_time: int):
        return None

    def probs(self, snapshot, contexts) -> np.ndarray:
        return np.full(np.atleast_2d(contexts).shape[0], self.p)

    def prob_gradient(self, snapshot, contexts, actions) -> np.ndarray:
        return np.zeros((np.atleast_2d(contexts).shape[0], 0))


POLICY_KINDS = {
    "mab_epsilon_greedy": MabEpsilonGreedy,
    "gaussian_thompson": GaussianThompson,
    "contextual_epsilon_greedy": ContextualEpsGreedy,
    "boltzmann": Boltzmann,
    "fixed_prob": FixedProb,
}
