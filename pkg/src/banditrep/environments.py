"""Data-generating processes for the simulated trials.

Four environments: a two-period nonstationary two-arm problem, a misspecified
linear contextual problem, a dosage-driven synthetic longitudinal environment,
and a zero-inflated-Poisson mobile-health environment with delayed effects.

Each config dataclass builds a runtime via build(n, streams); runtimes expose
contexts(t) and step(t, actions) -> (outcome, reward) for t = 1..T, drawing
all randomness from per-(role, t) derived streams.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .rng import StreamFactory, ar1_advance, ar1_start

# ---------------------------------------------------------------------------
# Reward primitives
# ---------------------------------------------------------------------------


def nonstationary_reward(action, t: int, noise, mu0: float = 0.0,
                         deltas=(0.0, -0.25)):
    """mu0 + delta_t * action + noise for a two-period trend."""
    if not 1 <= t <= len(deltas):
        raise DomainError(f"decision time t={t} outside 1..{len(deltas)}")
    return mu0 + deltas[t - 1] * np.asarray(action, dtype=float) + noise


ALPHA0_MISSPEC = np.array([0.1, 0.1, 0.0])
ALPHA1_MISSPEC = np.array([1.0 / 3.0, -2.0, 2.0])


def misspecified_reward(x, action, noise, alpha0=ALPHA0_MISSPEC, alpha1=ALPHA1_MISSPEC):
    """Quadratic-in-x reward [1,x,x^2].alpha0 + a*[1,x,x^2].alpha1 + noise."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("context x must lie in [0, 1]")
    base = alpha0[0] + alpha0[1] * x + alpha0[2] * x * x
    adv = alpha1[0] + alpha1[1] * x + alpha1[2] * x * x
    return base + np.asarray(action, dtype=float) * adv + noise


def dosage_advance(dosage, action, gamma: float):
    """Exp-discounted past-action average: gamma*dosage + (1-gamma)*action."""
    return gamma * np.asarray(dosage, dtype=float) + (1.0 - gamma) * np.asarray(action, dtype=float)


def synthetic_reward(dosage, action, noise, alpha=(0.0, 1.0, 0.0)):
    """alpha0 + alpha1*dosage + alpha2*action + noise."""
    return alpha[0] + alpha[1] * np.asarray(dosage, dtype=float) \
        + alpha[2] * np.asarray(action, dtype=float) + noise


def baseline_synthetic_average_reward(p: float = 0.5, T: int = 50, gamma: float = 0.95,
                                      alpha=(0.0, 1.0, 0.0)) -> float:
    """Closed-form E[(1/T) sum Y] under a constant Bernoulli(p) policy.

    E[dosage_t] = p*(1 - gamma^(t-1)); averaging the geometric ramp over T gives
    p*(1 - (1 - gamma^T) / (T*(1-gamma))) for the dosage term.
    """
    ramp = 1.0 - (1.0 - gamma**T) / (T * (1.0 - gamma))
    return alpha[0] + alpha[1] * p * ramp + alpha[2] * p


# ---------------------------------------------------------------------------
# Zero-inflated Poisson primitives
# ---------------------------------------------------------------------------


def sigmoid(u):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def zip_outcome(g, w_b, w_p, delta_b, delta_n, action, shrink,
                stream: np.random.Generator):
    """Zero-inflated Poisson draw per row of g.

    Z ~ Bernoulli(1 - sigmoid(g.w_b - a*max(shrink*delta_b.g, 0)));
    S ~ Poisson(exp(g.w_p + a*max(shrink*delta_n.g, 0))); returns Z*S.
    Effect clamps keep the treatment from flipping sign.
    """
    shrink = np.asarray(shrink, dtype=float)
    if np.any(shrink <= 0) or np.any(shrink > 1):
        raise ConfigurationError("shrink factor must lie in (0, 1]")
    g = np.atleast_2d(np.asarray(g, dtype=float))
    a = np.asarray(action, dtype=float)
    eff_b = np.maximum(shrink * np.sum(delta_b * g, axis=1), 0.0)
    eff_n = np.maximum(shrink * np.sum(delta_n * g, axis=1), 0.0)
    p_zero_gate = sigmoid(np.sum(w_b * g, axis=1) - a * eff_b)
    z = stream.random(g.shape[0]) < (1.0 - p_zero_gate)
    lam = np.exp(np.sum(w_p * g, axis=1) + a * eff_n)
    s = stream.poisson(lam)
    return z.astype(np.int64) * s


@dataclass(frozen=True)
class CostParams:
    """Prompt-burden cost: xi1*1[Bbar>b]*1[Abar>a1] + xi2*1[Abar>a2] when treated."""

    xi1: float = 100.0
    xi2: float = 100.0
    b: float = 111.0
    a1: float = 0.5
    a2: float = 0.8

    def __post_init__(self):
        if self.a1 >= self.a2:
            raise ConfigurationError(f"cost thresholds need a1 < a2: {self.a1}, {self.a2}")


def oralytics_cost(bar_b, bar_a, action, params: CostParams = CostParams()):
    """Cost of sending a prompt; 0 when action = 0."""
    bar_b = np.asarray(bar_b, dtype=float)
    bar_a = np.asarray(bar_a, dtype=float)
    cost = params.xi1 * (bar_b > params.b) * (bar_a > params.a1) \
        + params.xi2 * (bar_a > params.a2)
    return np.asarray(action, dtype=float) * cost


def discounted_window_average(window: np.ndarray, gamma: float = 13.0 / 14.0) -> np.ndarray:
    """c_gamma * sum_j gamma^(j-1) * window[..., j-1]; window[..., 0] is most recent.

    c_gamma = (1-gamma)/(1-gamma^W) scales the W weights to sum to 1, so a
    constant window returns that constant.
    """
    if not 0 < gamma < 1:
        raise ConfigurationError(f"window gamma must be in (0, 1): {gamma}")
    w = window.shape[-1]
    weights = gamma ** np.arange(w)
    c = (1.0 - gamma) / (1.0 - gamma**w)
    return c * window @ weights


def app_engagement_step(p_app, stream: np.random.Generator) -> np.ndarray:
    """Daily Bernoulli(p_app) app-open indicator."""
    p = np.asarray(p_app, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ConfigurationError("p_app must lie in [0, 1]")
    return (stream.random(p.shape) < p).astype(np.int8)


# ---------------------------------------------------------------------------
# Population of individual outcome models
# ---------------------------------------------------------------------------

N_ENV_FEATURES = 7


@dataclass(frozen=True)
class IndividualParams:
    """One individual's ZIP outcome model (7 env features per weight vector)."""

    w_b: tuple
    w_p: tuple
    delta_b: tuple
    delta_n: tuple
    p_app: float

    def __post_init__(self):
        for name in ("w_b", "w_p", "delta_b", "delta_n"):
            vec = getattr(self, name)
            if len(vec) != N_ENV_FEATURES or not all(np.isfinite(vec)):
                raise ConfigurationError(f"{name} must be a finite {N_ENV_FEATURES}-vector")
        if not 0 <= self.p_app <= 1:
            raise ConfigurationError(f"p_app must lie in [0, 1]: {self.p_app}")


def load_population(path) -> list:
    """Parse the documented JSON population schema, naming the bad entry on error."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"population file {path}: line {exc.lineno}: {exc.msg}")
    if not isinstance(raw, list) or not raw:
        raise ConfigurationError(f"population file {path}: expected a non-empty JSON array")
    out = []
    for idx, entry in enumerate(raw):
        try:
            out.append(IndividualParams(
                w_b=tuple(entry["w_b"]), w_p=tuple(entry["w_p"]),
                delta_b=tuple(entry["delta_B"]), delta_n=tuple(entry["delta_N"]),
                p_app=float(entry["p_app"]),
            ))
        except (KeyError, TypeError, ConfigurationError) as exc:
            raise ConfigurationError(f"population file {path}: entry {idx}: {exc}")
    return out


def save_population(pool: list, path):
    rows = [{"w_b": list(p.w_b), "w_p": list(p.w_p), "delta_B": list(p.delta_b),
             "delta_N": list(p.delta_n), "p_app": p.p_app} for p in pool]
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=1)


# Synthetic prior defaults: intercept locations chosen so qualities land mostly
# in [0, 180] with a zero-inflated shape, brushing averages that can cross the
# cost threshold, and a modest positive prompt effect.
_PRIOR = {
    "w_p": (np.log(110.0), 0.25, 0.15),
    "w_b": (-0.7, 0.5, 0.25),
    "delta_b": (0.4, 0.3, 0.15),
    "delta_n": (0.08, 0.05, 0.03),
}


def sample_prior_individual(stream: np.random.Generator) -> IndividualParams:
    """One draw from the documented synthetic prior over outcome models."""
    vecs = {}
    for name, (loc, sd0, sd) in _PRIOR.items():
        vec = stream.normal(0.0, sd, size=N_ENV_FEATURES)
        vec[0] = stream.normal(loc, sd0)
        vecs[name] = tuple(vec)
    p_app = float(stream.beta(2.0, 2.0))
    return IndividualParams(w_b=vecs["w_b"], w_p=vecs["w_p"],
                            delta_b=vecs["delta_b"], delta_n=vecs["delta_n"],
                            p_app=p_app)


def sample_population(source, n: int, stream: np.random.Generator) -> list:
    """n parameter sets drawn with replacement from a pool, or from the prior.

    source: list of IndividualParams (a pool), a path to the JSON schema, or
    the string "synthetic_prior" to sample fresh models.
    """
    if n < 1:
        raise ConfigurationError(f"population size must be >= 1: {n}")
    if source == "synthetic_prior":
        return [sample_prior_individual(stream) for _ in range(n)]
    pool = load_population(source) if isinstance(source, str) else list(source)
    if not pool:
        raise ConfigurationError("population pool is empty")
    idx = stream.integers(0, len(pool), size=n)
    return [pool[i] for i in idx]


# ---------------------------------------------------------------------------
# Environment configs and runtimes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonstationaryMabEnv:
    """Two-arm problem with a time trend in the treatment effect; no context."""

    mu0: float = 0.0
    deltas: tuple = (0.0, -0.25)

    kind = "nonstationary_mab"
    context_dim = 0

    def horizon_cap(self) -> int:
        return len(self.deltas)

    def build(self, n: int, T: int, streams: StreamFactory):
        if T > len(self.deltas):
            raise ConfigurationError(
                f"nonstationary env defines {len(self.deltas)} decision times, got T={T}")
        return _NonstationaryRuntime(self, n, streams)


class _NonstationaryRuntime:
    def __init__(self, cfg: NonstationaryMabEnv, n: int, streams: StreamFactory):
        self.cfg = cfg
        self.n = n
        self.streams = streams

    def contexts(self, t: int) -> np.ndarray:
        return np.zeros((self.n, 0))

    def step(self, t: int, actions: np.ndarray):
        noise = self.streams.stream("env", t).standard_normal(self.n)
        reward = nonstationary_reward(actions, t, noise, self.cfg.mu0, self.cfg.deltas)
        return reward, reward


@dataclass(frozen=True)
class MisspecifiedLinearEnv:
    """Stationary contextual problem whose mean reward is quadratic in x."""

    alpha0: tuple = (0.1, 0.1, 0.0)
    alpha1: tuple = (1.0 / 3.0, -2.0, 2.0)

    kind = "misspecified_linear"
    context_dim = 1

    def build(self, n: int, T: int, streams: StreamFactory):
        return _MisspecifiedRuntime(self, n, streams)


class _MisspecifiedRuntime:
    def __init__(self, cfg: MisspecifiedLinearEnv, n: int, streams: StreamFactory):
        self.cfg = cfg
        self.n = n
        self.streams = streams
        self._x = None

    def contexts(self, t: int) -> np.ndarray:
        self._x = self.streams.stream("context", t).random(self.n)
        return self._x[:, None]

    def step(self, t: int, actions: np.ndarray):
        noise = self.streams.stream("env", t).standard_normal(self.n)
        reward = misspecified_reward(self._x, actions, noise,
                                     np.asarray(self.cfg.alpha0), np.asarray(self.cfg.alpha1))
        return reward, reward


@dataclass(frozen=True)
class SyntheticDosageEnv:
    """Dosage-driven longitudinal environment with AR(1) reward noise.

    Context is the previous decision time's reward (0 at t=1).
    """

    alpha: tuple = (0.0, 1.0, 0.0)
    gamma: float = 0.95
    rho: float = float(np.sqrt(0.5))
    noise_sd: float = 1.0

    kind = "synthetic_dosage"
    context_dim = 1

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ConfigurationError(f"gamma must lie in [0, 1): {self.gamma}")
        if not 0 <= self.rho < 1:
            raise ConfigurationError(f"rho must lie in [0, 1): {self.rho}")

    def build(self, n: int, T: int, streams: StreamFactory):
        return _SyntheticRuntime(self, n, streams)


class _SyntheticRuntime:
    def __init__(self, cfg: SyntheticDosageEnv, n: int, streams: StreamFactory):
        self.cfg = cfg
        self.n = n
        self.streams = streams
        self.dosage = np.zeros(n)
        self.prev_reward = np.zeros(n)
        self._ar = None

    def contexts(self, t: int) -> np.ndarray:
        return self.prev_reward[:, None]

    def step(self, t: int, actions: np.ndarray):
        if t == 1:
            self._ar = ar1_start(self.streams.stream("env", t), self.n, self.cfg.noise_sd)
        else:
            self._ar = ar1_advance(self._ar, self.streams.stream("env", t),
                                   self.cfg.rho, self.cfg.noise_sd)
        reward = synthetic_reward(self.dosage, actions, self._ar, self.cfg.alpha)
        self.dosage = dosage_advance(self.dosage, actions, self.cfg.gamma)
        self.prev_reward = np.asarray(reward)
        return reward, reward


@dataclass(frozen=True)
class OralyticsZipEnv:
    """Mobile-health environment: ZIP brushing quality, prompt costs, delayed effects.

    Two decision points per day. Outcome is brushing quality (seconds, capped);
    the algorithm's reward subtracts the prompt-burden cost.
    """

    population: tuple = ()           # pool of IndividualParams, drawn with replacement
    cost: CostParams = field(default_factory=CostParams)
    shrink_factor: float = 0.5
    shrink_check_interval: int = 14
    window: int = 14
    window_gamma: float = 13.0 / 14.0
    quality_cap: float = 180.0

    kind = "oralytics_zip"
    context_dim = 5

    def __post_init__(self):
        if not 0 < self.shrink_factor <= 1:
            raise ConfigurationError(f"shrink_factor must lie in (0, 1]: {self.shrink_factor}")
        if not self.population:
            raise ConfigurationError("oralytics env needs a non-empty population pool")

    def build(self, n: int, T: int, streams: StreamFactory):
        return _OralyticsRuntime(self, n, T, streams)


def shrink_criterion(bar_b, bar_a, cost: CostParams):
    """(Bbar > b and Abar > a1) or (Abar > a2): the burden trigger."""
    return ((bar_b > cost.b) & (bar_a > cost.a1)) | (bar_a > cost.a2)


class _OralyticsRuntime:
    def __init__(self, cfg: OralyticsZipEnv, n: int, T: int, streams: StreamFactory):
        self.cfg = cfg
        self.n = n
        self.T = T
        self.streams = streams
        people = sample_population(list(cfg.population), n, streams.stream("recruit"))
        self.w_b = np.array([p.w_b for p in people])
        self.w_p = np.array([p.w_p for p in people])
        self.delta_b = np.array([p.delta_b for p in people])
        self.delta_n = np.array([p.delta_n for p in people])
        self.p_app = np.array([p.p_app for p in people])
        w = cfg.window
        self.quality_window = np.zeros((n, w))   # column 0 = most recent
        self.action_window = np.zeros((n, w))
        self.shrink_exponent = np.zeros(n, dtype=np.int64)
        self.triggered = np.zeros(n, dtype=bool)
        self.next_check = np.zeros(n, dtype=np.int64)
        self.prior_day_app = app_engagement_step(self.p_app, streams.stream("app", 0))
        self._bar_b = None
        self._bar_a = None

    @staticmethod
    def _is_evening(t: int) -> bool:
        return t % 2 == 0

    def _day(self, t: int) -> int:
        return (t + 1) // 2

    def env_features(self, t: int) -> np.ndarray:
        """The 7 env features; the first 5 are the algorithm's context."""
        n = self.n
        self._bar_b = discounted_window_average(self.quality_window, self.cfg.window_gamma)
        self._bar_a = discounted_window_average(self.action_window, self.cfg.window_gamma)
        day = self._day(t)
        n_days = max(self._day(self.T), 2)
        g = np.empty((n, N_ENV_FEATURES))
        g[:, 0] = 1.0
        g[:, 1] = 1.0 if self._is_evening(t) else 0.0
        g[:, 2] = 2.0 * self._bar_b / self.cfg.quality_cap - 1.0
        g[:, 3] = 2.0 * self._bar_a - 1.0
        g[:, 4] = self.prior_day_app
        g[:, 5] = 1.0 if ((day - 1) % 7) >= 5 else 0.0
        g[:, 6] = 2.0 * (day - 1) / (n_days - 1) - 1.0
        return g

    def contexts(self, t: int) -> np.ndarray:
        return self.env_features(t)[:, :5]

    def step(self, t: int, actions: np.ndarray):
        g = self.env_features(t)
        shrink = self.cfg.shrink_factor ** self.shrink_exponent
        quality = zip_outcome(g, self.w_b, self.w_p, self.delta_b, self.delta_n,
                              actions, np.maximum(shrink, np.finfo(float).tiny),
                              self.streams.stream("env", t))
        quality = np.minimum(quality, self.cfg.quality_cap)
        cost = oralytics_cost(self._bar_b, self._bar_a, actions, self.cfg.cost)
        reward = quality - cost

        # responsivity shrink: effective from the next decision point
        crit = shrink_criterion(self._bar_b, self._bar_a, self.cfg.cost)
        fresh = ~self.triggered & crit
        self.shrink_exponent[fresh] = 1
        self.triggered |= fresh
        self.next_check[fresh] = t + self.cfg.shrink_check_interval
        due = self.triggered & ~fresh & (self.next_check == t)
        self.shrink_exponent[due & crit] += 1
        self.shrink_exponent[due & ~crit] = 0
        self.next_check[due] = t + self.cfg.shrink_check_interval

        self.quality_window = np.roll(self.quality_window, 1, axis=1)
        self.quality_window[:, 0] = quality
        self.action_window = np.roll(self.action_window, 1, axis=1)
        self.action_window[:, 0] = actions

        if self._is_evening(t):
            self.prior_day_app = app_engagement_step(
                self.p_app, self.streams.stream("app", self._day(t)))
        return quality.astype(float), reward.astype(float)


ENV_KINDS = {
    "nonstationary_mab": NonstationaryMabEnv,
    "misspecified_linear": MisspecifiedLinearEnv,
    "synthetic_dosage": SyntheticDosageEnv,
    "oralytics_zip": OralyticsZipEnv,
}
