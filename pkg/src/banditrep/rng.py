"""Deterministic, splittable random-number streams and distribution primitives.

Every source of randomness in the package is a numpy Generator derived from a
SeedSpec through SeedSequence hashing, so distinct (replication, role) pairs
give independent streams and identical specs give bit-identical draws on any
schedule.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

_UINT64_MAX = 2**64 - 1


def _role_key(tag: str) -> int:
    """Stable 64-bit key for a role tag (process-hash salting would break replay)."""
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class SeedSpec:
    """Addresses one random stream: (master seed, replication, role, substream)."""

    master_seed: int
    replication_index: int = 0
    role_tag: str = "main"
    substream: tuple = ()

    def __post_init__(self):
        if not 0 <= self.master_seed <= _UINT64_MAX:
            raise ConfigurationError(f"master_seed must be in [0, 2^64): {self.master_seed}")
        if self.replication_index < 0:
            raise ConfigurationError(f"replication_index must be >= 0: {self.replication_index}")


def derive_stream(spec: SeedSpec) -> np.random.Generator:
    """Independent, reproducible stream for a SeedSpec.

    Same spec -> bit-identical sequences; distinct (replication_index,
    role_tag, substream) -> statistically independent streams.
    """
    key = (spec.replication_index, _role_key(spec.role_tag), *spec.substream)
    return np.random.default_rng(np.random.SeedSequence(spec.master_seed, spawn_key=key))


class StreamFactory:
    """Binds (master_seed, replication_index) and hands out role streams."""

    def __init__(self, master_seed: int, replication_index: int = 0):
        self.master_seed = master_seed
        self.replication_index = replication_index

    def stream(self, role_tag: str, *substream: int) -> np.random.Generator:
        return derive_stream(SeedSpec(self.master_seed, self.replication_index,
                                      role_tag, tuple(substream)))


@dataclass(frozen=True)
class DistSpec:
    """One of normal(mu, sigma), bernoulli(p), poisson(lam), uniform(a, b)."""

    kind: str
    params: tuple

    @classmethod
    def normal(cls, mu: float, sigma: float) -> "DistSpec":
        return cls("normal", (float(mu), float(sigma)))

    @classmethod
    def bernoulli(cls, p: float) -> "DistSpec":
        return cls("bernoulli", (float(p),))

    @classmethod
    def poisson(cls, lam: float) -> "DistSpec":
        return cls("poisson", (float(lam),))

    @classmethod
    def uniform(cls, a: float, b: float) -> "DistSpec":
        return cls("uniform", (float(a), float(b)))

    def validate(self):
        k, p = self.kind, self.params
        if k == "normal":
            if p[1] < 0:
                raise ConfigurationError(f"normal sigma must be >= 0: {p[1]}")
        elif k == "bernoulli":
            if not 0 <= p[0] <= 1:
                raise ConfigurationError(f"bernoulli p must be in [0, 1]: {p[0]}")
        elif k == "poisson":
            if p[0] < 0:
                raise ConfigurationError(f"poisson lambda must be >= 0: {p[0]}")
        elif k == "uniform":
            if p[0] > p[1]:
                raise ConfigurationError(f"uniform requires a <= b: {p}")
        else:
            raise ConfigurationError(f"unknown distribution kind: {k!r}")


def draw(stream: np.random.Generator, spec: DistSpec, size=None):
    """Draw from the named distribution (scalar by default, array with size)."""
    spec.validate()
    k, p = spec.kind, spec.params
    if k == "normal":
        return stream.normal(p[0], p[1], size=size)
    if k == "bernoulli":
        # binomial(1, p) so degenerate p in {0, 1} is exact
        return stream.binomial(1, p[0], size=size)
    if k == "poisson":
        return stream.poisson(p[0], size=size)
    return stream.uniform(p[0], p[1], size=size)


@dataclass
class Ar1NoisePath:
    """Stationary AR(1) path: Corr(values[t], values[s]) = rho^|t-s| exactly."""

    values: np.ndarray
    rho: float
    marginal_sd: float


def _check_ar1(rho: float, marginal_sd: float, T: int):
    if not 0 <= rho < 1:
        raise ConfigurationError(f"ar1 rho must be in [0, 1): {rho}")
    if marginal_sd <= 0:
        raise ConfigurationError(f"ar1 marginal_sd must be > 0: {marginal_sd}")
    if T < 1:
        raise ConfigurationError(f"ar1 length must be >= 1: {T}")


def sample_ar1_noise(stream: np.random.Generator, T: int, rho: float,
                     marginal_sd: float) -> Ar1NoisePath:
    """values[0] ~ N(0, sd^2); values[t] = rho*values[t-1] + sqrt(1-rho^2)*sd*eta_t."""
    _check_ar1(rho, marginal_sd, T)
    values = np.empty(T)
    values[0] = stream.normal(0.0, marginal_sd)
    scale = np.sqrt(1.0 - rho * rho) * marginal_sd
    for t in range(1, T):
        values[t] = rho * values[t - 1] + scale * stream.normal()
    return Ar1NoisePath(values=values, rho=rho, marginal_sd=marginal_sd)


def ar1_start(stream: np.random.Generator, n: int, marginal_sd: float = 1.0) -> np.ndarray:
    """Initial stationary state for n parallel AR(1) paths."""
    return stream.normal(0.0, marginal_sd, size=n)


def ar1_advance(state: np.ndarray, stream: np.random.Generator, rho: float,
                marginal_sd: float = 1.0) -> np.ndarray:
    """One AR(1) step for a vector of paths, preserving the marginal variance."""
    scale = np.sqrt(1.0 - rho * rho) * marginal_sd
    return rho * state + scale * stream.standard_normal(state.shape[0])
