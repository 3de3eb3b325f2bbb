import numpy as np
import pytest

from banditrep.errors import ConfigurationError
from banditrep.rng import (Ar1NoisePath, DistSpec, SeedSpec, StreamFactory,
                           ar1_advance, ar1_start, derive_stream, draw,
                           sample_ar1_noise)


def test_same_spec_identical_draws():
    spec = SeedSpec(42, 0, "env")
    a = derive_stream(spec).random(100)
    b = derive_stream(spec).random(100)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("other", [SeedSpec(42, 1, "env"), SeedSpec(42, 0, "policy")])
def test_distinct_streams_uncorrelated(other):
    base = derive_stream(SeedSpec(42, 0, "env")).random(1_000_000)
    alt = derive_stream(other).random(1_000_000)
    assert abs(np.corrcoef(base, alt)[0, 1]) < 0.01


def test_substream_changes_draws():
    a = derive_stream(SeedSpec(7, 0, "env", (1,))).random(10)
    b = derive_stream(SeedSpec(7, 0, "env", (2,))).random(10)
    assert not np.array_equal(a, b)


def test_factory_matches_spec():
    fac = StreamFactory(9, 3)
    a = fac.stream("env", 5).random(10)
    b = derive_stream(SeedSpec(9, 3, "env", (5,))).random(10)
    np.testing.assert_array_equal(a, b)


def test_seed_spec_validation():
    with pytest.raises(ConfigurationError):
        SeedSpec(-1)
    with pytest.raises(ConfigurationError):
        SeedSpec(0, -2)


def test_bernoulli_degenerate():
    s = derive_stream(SeedSpec(1))
    assert np.all(draw(s, DistSpec.bernoulli(0.0), size=1000) == 0)
    assert np.all(draw(s, DistSpec.bernoulli(1.0), size=1000) == 1)


def test_normal_moments():
    s = derive_stream(SeedSpec(2))
    x = draw(s, DistSpec.normal(0, 1), size=1_000_000)
    assert abs(x.mean()) < 0.005
    assert abs(x.std() - 1.0) < 0.005


def test_poisson_moments():
    s = derive_stream(SeedSpec(3))
    x = draw(s, DistSpec.poisson(3.0), size=1_000_000)
    assert abs(x.mean() - 3.0) < 0.01


def test_uniform_range_and_bad_params():
    s = derive_stream(SeedSpec(4))
    x = draw(s, DistSpec.uniform(2.0, 3.0), size=1000)
    assert x.min() >= 2.0 and x.max() <= 3.0
    with pytest.raises(ConfigurationError):
        draw(s, DistSpec.uniform(3.0, 2.0))
    with pytest.raises(ConfigurationError):
        draw(s, DistSpec.normal(0.0, -1.0))
    with pytest.raises(ConfigurationError):
        draw(s, DistSpec.bernoulli(1.5))
    with pytest.raises(ConfigurationError):
        draw(s, DistSpec.poisson(-0.1))


def test_ar1_iid_when_rho_zero():
    s = derive_stream(SeedSpec(5))
    path = sample_ar1_noise(s, 10_000, rho=0.0, marginal_sd=2.0)
    lag1 = np.corrcoef(path.values[:-1], path.values[1:])[0, 1]
    assert abs(lag1) < 0.05
    assert abs(path.values.std() - 2.0) < 0.06


def test_ar1_target_correlations():
    # rho = sqrt(0.5): lag-1 correlation sqrt(0.5), lag-2 correlation 0.5
    rho = float(np.sqrt(0.5))
    fac = StreamFactory(6)
    state = ar1_start(fac.stream("ar", 0), 1_000_000)
    x1 = ar1_advance(state, fac.stream("ar", 1), rho)
    x2 = ar1_advance(x1, fac.stream("ar", 2), rho)
    assert abs(np.corrcoef(state, x1)[0, 1] - rho) < 0.005
    assert abs(np.corrcoef(state, x2)[0, 1] - 0.5) < 0.005


def test_ar1_stationary_variance():
    # marginal variance stays marginal_sd^2 at every t (3 MC standard errors)
    fac = StreamFactory(8)
    n = 200_000
    state = ar1_start(fac.stream("ar", 0), n, marginal_sd=1.5)
    rho = 0.8
    for t in range(1, 6):
        state = ar1_advance(state, fac.stream("ar", t), rho, marginal_sd=1.5)
        var = state.var()
        se = 1.5**2 * np.sqrt(2.0 / n)
        assert abs(var - 1.5**2) < 3 * se


def test_ar1_single_step_and_validation():
    s = derive_stream(SeedSpec(10))
    path = sample_ar1_noise(s, 1, rho=0.3, marginal_sd=1.0)
    assert isinstance(path, Ar1NoisePath)
    assert path.values.shape == (1,)
    with pytest.raises(ConfigurationError):
        sample_ar1_noise(s, 10, rho=1.0, marginal_sd=1.0)
    with pytest.raises(ConfigurationError):
        sample_ar1_noise(s, 0, rho=0.5, marginal_sd=1.0)
