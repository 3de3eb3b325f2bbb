import numpy as np
import pytest
from scipy.stats import ks_2samp

from banditrep.errors import ConfigurationError
from banditrep.limits import (MisspecifiedGLaw,
                              ScaledUniformLaw, TwoPointLaw, b_matrix,
                              compute_misspecified_s, ks_distance,
                              misspecified_fit_cov, misspecified_g0_g1,
                              misspecified_sigma, misspecified_theta_limit,
                              segment_moments, v_vector)
from banditrep.rng import SeedSpec, derive_stream


# ---------------------------------------------------------------------------
# KS distance
# ---------------------------------------------------------------------------


def test_ks_identical_and_disjoint():
    x = np.array([1.0, 2.0, 3.0])
    assert ks_distance(x, x) == 0.0
    assert ks_distance(x, x + 100.0) == 1.0


def test_ks_null_level_and_scipy_agreement():
    stream = derive_stream(SeedSpec(1))
    a = stream.random(100_000)
    b = stream.random(100_000)
    d = ks_distance(a, b)
    assert d < 0.01
    assert d == pytest.approx(ks_2samp(a, b).statistic, abs=1e-12)
    c = stream.normal(size=357)
    e = stream.random(991)
    assert ks_distance(c, e) == pytest.approx(ks_2samp(c, e).statistic, abs=1e-12)


# ---------------------------------------------------------------------------
# quadrature machinery
# ---------------------------------------------------------------------------


def test_segment_moments_equal_literal_midpoint():
    for (a, b) in [(0.0, 1.0), (0.25, 0.8), (0.3, 0.3), (0.9, 0.4)]:
        got = segment_moments(a, b, 500, 8)
        x = a + (np.arange(500) + 0.5) * (b - a) / 500 if b > a else np.zeros(0)
        for k in range(9):
            literal = float(np.sum(x**k) * (b - a) / 500) if b > a else 0.0
            assert got[k] == pytest.approx(literal, abs=1e-12)


def test_quadrature_resolution_floor():
    with pytest.raises(ConfigurationError):
        segment_moments(0.0, 1.0, 50, 4)
    with pytest.raises(ConfigurationError):
        MisspecifiedGLaw(n_points=99)


def test_sigma_quadrature_convergence():
    coarse = misspecified_sigma(1000)
    fine = misspecified_sigma(100_000)
    assert np.abs(coarse - fine).max() < 1e-6


def test_sigma_against_monte_carlo():
    stream = derive_stream(SeedSpec(2))
    n = 2_000_000
    x = stream.random(n)
    a = (stream.random(n) < 0.5).astype(float)
    adv = 1.0 / 3.0 - 2.0 * x + 2.0 * x * x
    resid = a * adv + stream.standard_normal(n)
    pt = np.stack([np.ones(n), x, a, a * x], axis=1)
    mc = (pt * (resid**2)[:, None]).T @ pt / n
    assert np.abs(mc - misspecified_sigma(10_000)).max() < 5e-3


# ---------------------------------------------------------------------------
# moment matrices and the limiting law
# ---------------------------------------------------------------------------


def test_b_matrix_printed_entries():
    b = b_matrix()
    assert b[0, 1] == 0.5
    assert b[1, 1] == pytest.approx(1.0 / 3.0)
    np.testing.assert_allclose(b, b.T)
    # consistency: B beta* = v pins the first-stage moment vector
    np.testing.assert_allclose(b @ np.array([0.1, 0.1, 0.0, 0.0]), v_vector(),
                               atol=1e-15)


def test_s_matrix_symmetric_psd():
    s = compute_misspecified_s(2000)
    np.testing.assert_allclose(s, s.T, atol=1e-12)
    assert np.linalg.eigvalsh(s).min() >= 0.0


def test_fit_cov_matches_simulated_fits():
    # the 4x4 cov of sqrt(n)(betahat - beta*) from simulation matches B-1 S B-1
    from banditrep.engine import TrialConfig, run_trial
    from banditrep.environments import MisspecifiedLinearEnv
    from banditrep.policies import ContextualEpsGreedy
    cfg = TrialConfig(n=20_000, T=2, env=MisspecifiedLinearEnv(),
                      policy=ContextualEpsGreedy(eps=0.2), update_every=1,
                      master_seed=6)
    fits = []
    for r in range(200):
        trajs = run_trial(cfg.with_replication(r))
        fits.append(trajs.snapshots[0].stacked_beta())
    emp = np.cov(np.sqrt(cfg.n) * np.array(fits), rowvar=False)
    theory = misspecified_fit_cov(2000)
    # 200 reps put ~10% MC noise on each covariance entry
    assert np.abs(emp - theory).max() / np.abs(theory).max() < 0.25


def test_g0_g1_against_monte_carlo():
    stream = derive_stream(SeedSpec(3))
    for beta2 in ([0.2, -0.5], [-0.1, 0.3], [0.4, 0.0]):
        g0, g1 = misspecified_g0_g1(beta2, eps=0.2, n_points=10_000)
        n = 1_000_000
        x = stream.random(n)
        u = beta2[0] + beta2[1] * x
        p1 = np.where(u > 0, 0.9, 0.1)
        a = (stream.random(n) < p1).astype(float)
        pt = np.stack([np.ones(n), x, a, a * x], axis=1)
        g0_mc = pt.T @ pt / n
        rbar = (0.1 + 0.1 * x) + a * (1.0 / 3.0 - 2.0 * x + 2.0 * x * x)
        g1_mc = pt.T @ rbar / n
        assert np.abs(g0 - g0_mc).max() < 5e-3
        assert np.abs(g1 - g1_mc).max() < 5e-3


def test_two_point_law():
    law = TwoPointLaw(eps=0.1)
    assert sorted(law.atoms) == pytest.approx([-0.11875, -0.00625])
    stream = derive_stream(SeedSpec(4))
    draws = law.sample(1_000_000, stream)
    assert set(np.unique(draws)) == set(law.atoms)
    assert abs(draws.mean() - (-0.0625)) < 0.001
    # deterministic given the seed
    again = law.sample(4, derive_stream(SeedSpec(9)))
    np.testing.assert_array_equal(again, law.sample(4, derive_stream(SeedSpec(9))))
    smeared = law.sample(1000, stream, clt_sd=0.002)
    assert len(np.unique(smeared)) == 1000


def test_scaled_uniform_law():
    law = ScaledUniformLaw()
    draws = law.sample(1_000_000, derive_stream(SeedSpec(5)))
    assert draws.min() >= -0.125 and draws.max() <= 0.0
    # one-sample KS against the exact uniform CDF
    ecdf = np.arange(1, draws.size + 1) / draws.size
    cdf = np.sort(draws) / (-0.125)
    cdf = 1.0 - cdf      # map to U[0,1] CDF values
    stat = np.max(np.abs(np.sort(cdf) - ecdf))
    assert stat < 0.003


def test_misspecified_law_degenerate_at_zero_cov():
    law = MisspecifiedGLaw(s_cov=((0.0, 0.0), (0.0, 0.0)), eps=0.2, n_points=2000)
    draws = law.sample(50, derive_stream(SeedSpec(6)))
    point = misspecified_theta_limit([0.0, 0.0], 0.2, 2000)
    np.testing.assert_allclose(draws, np.tile(point, (50, 1)), atol=1e-12)


def test_misspecified_law_basic_shape():
    law = MisspecifiedGLaw(eps=0.2, n_points=2000)
    stream = derive_stream(SeedSpec(7))
    draws = law.sample(500, stream)
    assert draws.shape == (500, 4)
    # baseline block concentrates near (0.1, 0.1); advantage block spreads
    assert abs(draws[:, 0].mean() - 0.1) < 0.02
    assert draws[:, 2].std() > 0.02
    finite = law.sample_finite_n(200, 100_000, stream)
    assert finite.shape == (200, 4)
    assert finite[:, 2].std() > draws[:, 2].std() * 0.8
