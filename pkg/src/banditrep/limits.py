"""Limiting-distribution oracles and the two-sample KS distance.

Three laws: the two-point law of the threshold-rule propensity, the scaled
uniform law of the posterior-probability propensity, and the misspecified
least-squares limit obtained by pushing a Gaussian fit-limit through the
second-stage moment functions g0/g1. The g functions are one-dimensional
integrals of piecewise polynomials; they are evaluated with a composite
midpoint rule split at the threshold, computed through the binomial/power-sum
closed form of the midpoint sum (identical to summing the nodes).

Each law also offers a finite-sample variant that convolves the exact law with
the analytically-derived CLT noise of the estimator at sample size n, which is
what a finite-n theta-hat sample actually looks like.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import ConfigurationError

MIN_QUAD_POINTS = 100
DEFAULT_QUAD_POINTS = 10_000


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|."""
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ConfigurationError("ks_distance needs two non-empty samples")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


# ---------------------------------------------------------------------------
# Two-point and scaled-uniform laws (T=2 nonstationary environment)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoPointLaw:
    """theta-hat limit under the threshold rule: (delta2/2)*{eps/2, 1-eps/2} w.p. 1/2."""

    eps: float = 0.1
    delta2: float = -0.25

    @property
    def atoms(self) -> tuple:
        half = self.delta2 / 2.0
        return (half * (1.0 - self.eps / 2.0), half * (self.eps / 2.0))

    def mean(self) -> float:
        return float(np.mean(self.atoms))

    def sample(self, count: int, stream: np.random.Generator,
               clt_sd: float = 0.0) -> np.ndarray:
        """Exact atoms; clt_sd > 0 adds the finite-n Gaussian smearing."""
        lo, hi = self.atoms
        draws = np.where(stream.random(count) < 0.5, lo, hi)
        if clt_sd > 0:
            draws = draws + stream.normal(0.0, clt_sd, size=count)
        return draws

    @staticmethod
    def finite_n_sd(n: int, noise_var: float = 1.0, delta2: float = -0.25) -> float:
        """sd of the two-period reward average around its conditional atom.

        Var((R1+R2)/2) <= (2*noise_var + delta2^2/4)/4; the propensity term is
        negligible and the bound is used as the smearing scale.
        """
        return float(np.sqrt((2.0 * noise_var + delta2**2 / 4.0) / 4.0 / n))


@dataclass(frozen=True)
class ScaledUniformLaw:
    """theta-hat limit under the posterior-probability rule: scale * Uniform[0,1]."""

    scale: float = -0.125

    def sample(self, count: int, stream: np.random.Generator) -> np.ndarray:
        return self.scale * stream.random(count)


# ---------------------------------------------------------------------------
# Midpoint-rule polynomial moments
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _halfint_power_sums(n_points: int, kmax: int) -> tuple:
    """P_m = sum_{j=0}^{N-1} (j + 1/2)^m for m = 0..kmax."""
    j = np.arange(n_points) + 0.5
    return tuple(float(np.sum(j**m)) for m in range(kmax + 1))


def segment_moments(a: float, b: float, n_points: int, kmax: int) -> np.ndarray:
    """Composite-midpoint integrals int_a^b x^k dx for k = 0..kmax.

    Evaluated through the binomial expansion of sum_j (a + (j+1/2)h)^k, which
    equals the literal midpoint sum to rounding.
    """
    if n_points < MIN_QUAD_POINTS:
        raise ConfigurationError(
            f"quadrature resolution must be >= {MIN_QUAD_POINTS}: {n_points}")
    out = np.zeros(kmax + 1)
    if b <= a:
        return out
    h = (b - a) / n_points
    p = _halfint_power_sums(n_points, kmax)
    for k in range(kmax + 1):
        total = 0.0
        for m in range(k + 1):
            total += comb(k, m) * a ** (k - m) * h**m * p[m]
        out[k] = h * total
    return out


def _polymul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros(len(p) + len(q) - 1)
    for i, ci in enumerate(p):
        if ci != 0.0:
            out[i:i + len(q)] += ci * np.asarray(q, dtype=float)
    return out


def _poly_moment(coefs, moments) -> float:
    return float(sum(c * moments[k] for k, c in enumerate(coefs)))


# ---------------------------------------------------------------------------
# Misspecified least-squares limit
# ---------------------------------------------------------------------------

_BASE = np.array([0.1, 0.1, 0.0])          # E[R | x, a=0] coefficients in x
_ADV = np.array([1.0 / 3.0, -2.0, 2.0])    # treatment advantage coefficients
_BETA1_STAR = np.array([0.1, 0.1, 0.0, 0.0])
_KMAX = 8


def b_matrix() -> np.ndarray:
    """E[phit phit^T] at the first stage, phit = [1, x, a, a*x], closed form."""
    return np.array([
        [1.0, 1 / 2, 1 / 2, 1 / 4],
        [1 / 2, 1 / 3, 1 / 4, 1 / 6],
        [1 / 2, 1 / 4, 1 / 2, 1 / 4],
        [1 / 4, 1 / 6, 1 / 4, 1 / 6],
    ])


def v_vector() -> np.ndarray:
    """E[phit R] at the first stage, closed form."""
    return np.array([0.15, 0.05 + 0.1 / 3.0, 0.075, 0.025 + 0.1 / 6.0])


def _phit_polys(a: float) -> list:
    """Entries of phit(x, a) as polynomials in x."""
    return [np.array([1.0]), np.array([0.0, 1.0]),
            np.array([a]), np.array([0.0, a])]


def _weighted_outer(m1: np.ndarray, m0: np.ndarray, weight_polys: dict) -> np.ndarray:
    """sum_a E_w[phit(x,a) phit(x,a)^T wpoly_a(x)] given per-action x-moments."""
    out = np.zeros((4, 4))
    for a, mom in ((1.0, m1), (0.0, m0)):
        pp = _phit_polys(a)
        w = weight_polys[int(a)]
        for i in range(4):
            for j in range(i, 4):
                val = _poly_moment(_polymul(_polymul(pp[i], pp[j]), w), mom)
                out[i, j] += val
                if i != j:
                    out[j, i] += val
    return out


def _weighted_vec(m1: np.ndarray, m0: np.ndarray, weight_polys: dict) -> np.ndarray:
    out = np.zeros(4)
    for a, mom in ((1.0, m1), (0.0, m0)):
        pp = _phit_polys(a)
        w = weight_polys[int(a)]
        for i in range(4):
            out[i] += _poly_moment(_polymul(pp[i], w), mom)
    return out


_ONES = {1: np.array([1.0]), 0: np.array([1.0])}


def misspecified_sigma(n_points: int = DEFAULT_QUAD_POINTS) -> np.ndarray:
    """Sigma = E[(R - phit.beta1*)^2 phit phit^T] by quadrature.

    The conditional second moment of the residual is a*adv(x)^2 + noise_var
    with noise variance 1; actions are Bernoulli(0.5) independent of x.
    """
    full = segment_moments(0.0, 1.0, n_points, _KMAX)
    half = 0.5 * full
    w = {a: _polymul(_resid_poly(_BETA1_STAR, a), _resid_poly(_BETA1_STAR, a))
         + np.array([1.0, 0, 0, 0, 0]) for a in (0, 1)}
    return _weighted_outer(half, half, w)


def misspecified_fit_cov(n_points: int = DEFAULT_QUAD_POINTS) -> np.ndarray:
    """B^-1 Sigma B^-1: limiting covariance of sqrt(n)(betahat_1 - beta*_1)."""
    binv = np.linalg.inv(b_matrix())
    return binv @ misspecified_sigma(n_points) @ binv


def compute_misspecified_s(n_points: int = DEFAULT_QUAD_POINTS) -> np.ndarray:
    """Advantage-block 2x2 of B^-1 Sigma B^-1."""
    return misspecified_fit_cov(n_points)[2:, 2:]


def _active_interval(beta2) -> tuple:
    """{x in [0,1]: beta2[0] + beta2[1]*x > 0} as an interval."""
    b0, b1 = float(beta2[0]), float(beta2[1])
    if b1 == 0.0:
        return (0.0, 1.0) if b0 > 0 else (0.0, 0.0)
    x_star = -b0 / b1
    if b1 > 0:
        return (min(max(x_star, 0.0), 1.0), 1.0)
    return (0.0, min(max(x_star, 0.0), 1.0))


def _pi_moments(beta2, eps: float, n_points: int) -> tuple:
    """x-moments weighted by pi(x,1;beta) and pi(x,0;beta), threshold split."""
    full = segment_moments(0.0, 1.0, n_points, _KMAX)
    lo, hi = _active_interval(beta2)
    act = segment_moments(lo, hi, n_points, _KMAX)
    m1 = eps / 2.0 * full + (1.0 - eps) * act
    return m1, full - m1


def _resid_poly(theta: np.ndarray, a: float) -> np.ndarray:
    """E[R | x, a] - phit(x, a).theta as a polynomial in x."""
    th0 = np.asarray(theta)[:2]
    th1 = np.asarray(theta)[2:]
    lead = th0 + a * th1
    return (_BASE + a * _ADV) - np.array([lead[0], lead[1], 0.0])


def misspecified_g0_g1(beta2, eps: float, n_points: int = DEFAULT_QUAD_POINTS):
    """Second-stage moment matrices under the threshold policy at beta2."""
    m1, m0 = _pi_moments(beta2, eps, n_points)
    g0 = _weighted_outer(m1, m0, _ONES)
    rbar = {1: _BASE + _ADV, 0: _BASE}
    g1 = _weighted_vec(m1, m0, rbar)
    return g0, g1


def misspecified_theta_limit(beta2, eps: float,
                             n_points: int = DEFAULT_QUAD_POINTS) -> np.ndarray:
    """theta_inf(beta2) = (B + g0)^-1 (v + g1)."""
    g0, g1 = misspecified_g0_g1(beta2, eps, n_points)
    return np.linalg.solve(b_matrix() + g0, v_vector() + g1)


@dataclass(frozen=True)
class MisspecifiedGLaw:
    """Limiting law of the pooled least-squares estimate: theta_inf(N(0, S))."""

    s_cov: tuple = ()                 # 2x2; computed from first principles if empty
    eps: float = 0.2
    n_points: int = DEFAULT_QUAD_POINTS

    def __post_init__(self):
        if self.n_points < MIN_QUAD_POINTS:
            raise ConfigurationError(
                f"quadrature resolution must be >= {MIN_QUAD_POINTS}: {self.n_points}")

    def _s(self) -> np.ndarray:
        if self.s_cov:
            return np.asarray(self.s_cov, dtype=float)
        return compute_misspecified_s(self.n_points)

    def sample(self, count: int, stream: np.random.Generator) -> np.ndarray:
        """(count, 4) draws from the exact limiting law."""
        s = self._s()
        betas = stream.multivariate_normal(np.zeros(2), s, size=count,
                                           method="cholesky" if _is_pd(s) else "svd")
        out = np.empty((count, 4))
        for i, b in enumerate(betas):
            out[i] = misspecified_theta_limit(b, self.eps, self.n_points)
        return out

    def sample_finite_n(self, count: int, n: int,
                        stream: np.random.Generator) -> np.ndarray:
        """Exact law convolved with the estimator's CLT noise at sample size n.

        Conditional on the first-stage fit zeta (whose limit is N(0, W) with
        W = B^-1 Sigma B^-1), the pooled score is Gaussian with mean C W^-1
        zeta and covariance Var(s) - C W^-1 C^T, where C = Cov(score, zeta)
        comes from the shared first-stage data. All moments are the same
        piecewise-polynomial integrals as g0/g1.
        """
        npts = self.n_points
        b_mat = b_matrix()
        binv = np.linalg.inv(b_mat)
        w_cov = misspecified_fit_cov(npts)
        winv = np.linalg.pinv(w_cov)
        full = segment_moments(0.0, 1.0, npts, _KMAX)
        half = 0.5 * full

        zetas = stream.multivariate_normal(np.zeros(4), w_cov, size=count, method="svd")
        z_noise = stream.standard_normal((count, 4))
        out = np.empty((count, 4))
        rtilde = {a: _resid_poly(_BETA1_STAR, a) for a in (0, 1)}
        for i in range(count):
            zeta = zetas[i]
            beta2 = zeta[2:]
            g0, g1 = misspecified_g0_g1(beta2, self.eps, npts)
            g_mat = b_mat + g0
            theta = np.linalg.solve(g_mat, v_vector() + g1)
            r = {a: _resid_poly(theta, a) for a in (0, 1)}
            c_vec = _weighted_vec(half, half, r)
            w2 = {a: _polymul(r[a], r[a]) + np.array([1.0, 0, 0, 0, 0]) for a in (0, 1)}
            sig1 = _weighted_outer(half, half, w2)
            m1, m0 = _pi_moments(beta2, self.eps, npts)
            sig2 = _weighted_outer(m1, m0, w2)
            var_s = sig1 + sig2 - 2.0 * np.outer(c_vec, c_vec)
            wk = {a: _polymul(r[a], rtilde[a]) + np.array([1.0, 0, 0, 0, 0])
                  for a in (0, 1)}
            c_mat = _weighted_outer(half, half, wk) @ binv
            mu_s = c_mat @ winv @ zeta
            omega = var_s - c_mat @ winv @ c_mat.T
            omega = (omega + omega.T) / 2.0
            evals, evecs = np.linalg.eigh(omega)
            root = evecs @ np.diag(np.sqrt(np.clip(evals, 0.0, None)))
            score = mu_s + root @ z_noise[i]
            out[i] = theta + np.linalg.solve(g_mat, score) / np.sqrt(n)
        return out


def _is_pd(mat: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(mat)
        return True
    except np.linalg.LinAlgError:
        return False
