import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from levylogistic import (
    DomainError,
    ModelParams,
    deterministic_solution,
    levy_constant,
    nondimensionalize,
    potential,
    sample_alpha_stable,
    sample_gaussian,
)
from levylogistic.core import make_rng, stable_from_uniforms

mpmath.mp.dps = 50


def c_alpha_mp(alpha):
    a = mpmath.mpf(alpha)
    return a * mpmath.gamma((1 + a) / 2) / (2 ** (1 - a) * mpmath.sqrt(mpmath.pi) * mpmath.gamma(1 - a / 2))


# -- levy constant ---------------------------------------------------------

def test_levy_constant_alpha_one():
    assert levy_constant(1.0).c_alpha == pytest.approx(1 / math.pi, rel=1e-15)


def test_levy_constant_alpha_half_high_precision():
    assert levy_constant(0.5).c_alpha == pytest.approx(float(c_alpha_mp("0.5")), rel=1e-14)


@pytest.mark.parametrize("alpha", np.linspace(0.01, 1.99, 25))
def test_levy_constant_matches_mpmath(alpha):
    assert levy_constant(alpha).c_alpha == pytest.approx(float(c_alpha_mp(alpha)), rel=1e-13)


def test_levy_constant_extreme_alphas_finite_positive():
    for a in (0.001, 1.999):
        c = levy_constant(a).c_alpha
        assert math.isfinite(c) and c > 0


@pytest.mark.parametrize("alpha", [0.0, 2.0, -0.5, 2.5])
def test_levy_constant_rejects_out_of_range(alpha):
    with pytest.raises(DomainError):
        levy_constant(alpha)


def test_levy_constant_continuous():
    for a in np.linspace(0.01, 1.98, 100):
        assert abs(levy_constant(a + 1e-6).c_alpha - levy_constant(a).c_alpha) < 1e-4


# -- deterministic baseline ------------------------------------------------

def test_deterministic_equilibria():
    assert deterministic_solution(1.0, 7.3) == 1.0
    assert deterministic_solution(0.0, 7.3) == 0.0
    assert deterministic_solution(4.0, 2.0, r=0.5, K=4.0) == pytest.approx(4.0)


def test_deterministic_arithmetic():
    assert deterministic_solution(0.5, 10.0) == pytest.approx(0.5 / (0.5 + 0.5 * math.exp(-10)), rel=1e-15)


@given(x0=st.floats(0.01, 3.0), t1=st.floats(0, 5), t2=st.floats(0, 5),
       r=st.floats(0.1, 3), K=st.floats(0.5, 2))
def test_deterministic_semigroup(x0, t1, t2, r, K):
    direct = deterministic_solution(x0, t1 + t2, r, K)
    composed = deterministic_solution(deterministic_solution(x0, t1, r, K), t2, r, K)
    assert composed == pytest.approx(direct, rel=1e-12)


@given(x0=st.floats(0.01, 0.99), K=st.just(1.0))
def test_deterministic_monotone_below_capacity(x0, K):
    t = np.linspace(0, 20, 200)
    assert np.all(np.diff(deterministic_solution(x0, t, 1.0, K)) >= 0)


@given(x0=st.floats(1.01, 10.0))
def test_deterministic_monotone_above_capacity(x0):
    t = np.linspace(0, 20, 200)
    assert np.all(np.diff(deterministic_solution(x0, t)) <= 0)


def test_deterministic_tends_to_capacity():
    assert deterministic_solution(0.01, 60.0, 1.0, 3.0) == pytest.approx(3.0, rel=1e-12)


def test_deterministic_rejects_negative_input():
    with pytest.raises(DomainError):
        deterministic_solution(-0.1, 1.0)


# -- potential ---------------------------------------------------------------

def test_potential_values():
    assert potential(0.0) == 0.0
    assert potential(1.0) == pytest.approx(-1 / 6)


def test_potential_stationary_points():
    h = 1e-6
    for x, K in ((1.0, 1.0), (2.5, 2.5), (0.0, 1.0)):
        dU = (potential(x + h, 1.0, K) - potential(x - h, 1.0, K)) / (2 * h)
        assert abs(dU) < 1e-8


# -- parameters and scaling ----------------------------------------------------

def test_model_params_validation():
    with pytest.raises(DomainError):
        ModelParams(r=0)
    with pytest.raises(DomainError):
        ModelParams(K=-1)
    with pytest.raises(DomainError):
        ModelParams(sigma=1.0, alpha=2.0)
    with pytest.raises(DomainError):
        ModelParams(lam=-0.1)
    assert ModelParams(lam=0.5).is_gaussian
    assert ModelParams(sigma=0.5, alpha=1.2).is_levy


def test_nondimensionalize_fixed_point():
    p = ModelParams(r=1, K=1, lam=0.5)
    assert nondimensionalize(p) == p


def test_nondimensionalize_gaussian():
    q = nondimensionalize(ModelParams(r=4, K=10, lam=2))
    assert (q.r, q.K, q.lam) == (1.0, 1.0, 1.0)
    assert q.time_scale == 4
    assert q.to_physical_time(8.0) == pytest.approx(2.0)


def test_nondimensionalize_levy_keeps_rate():
    q = nondimensionalize(ModelParams(r=0.1, K=1, sigma=1, alpha=1.5))
    assert (q.r, q.K, q.sigma, q.alpha) == (0.1, 1.0, 1.0, 1.5)


# -- samplers --------------------------------------------------------------

def test_samplers_empty():
    assert sample_alpha_stable(1.3, 0).size == 0
    assert sample_gaussian(0).size == 0


@pytest.mark.parametrize("alpha", [0.0, 2.0])
def test_stable_sampler_domain(alpha):
    with pytest.raises(DomainError):
        sample_alpha_stable(alpha, 10)


@pytest.mark.parametrize("alpha", [1.0, 0.6, 1.5])
def test_stable_characteristic_function(alpha):
    n = 1_000_000
    x = sample_alpha_stable(alpha, n, seed=11)
    c = np.cos(x)
    se = c.std(ddof=1) / math.sqrt(n)
    assert abs(c.mean() - math.exp(-1.0)) < 3 * se


def test_stable_median_symmetric():
    n, alpha = 1_000_000, 0.7
    x = sample_alpha_stable(alpha, n, seed=5)
    f0 = math.gamma(1 + 1 / alpha) / math.pi  # density at the origin
    se = 1 / (2 * f0 * math.sqrt(n))
    assert abs(np.median(x)) < 3 * se


def test_stable_near_two_is_gaussian_like():
    a = sample_alpha_stable(1.999, 100_000, seed=3)
    g = math.sqrt(2) * sample_gaussian(100_000, seed=4)
    assert stats.ks_2samp(a, g).pvalue > 1e-3


def test_gaussian_moments():
    x = sample_gaussian(1_000_000, seed=9)
    assert abs(x.mean()) < 3e-3
    assert abs(x.var() - 1) < 0.01


def test_sampling_is_reproducible():
    assert np.array_equal(sample_alpha_stable(0.8, 1000, seed=2), sample_alpha_stable(0.8, 1000, seed=2))
    assert np.array_equal(sample_gaussian(1000, seed=2), sample_gaussian(1000, seed=2))
    assert not np.array_equal(sample_gaussian(1000, seed=2, stream=0), sample_gaussian(1000, seed=2, stream=1))


@settings(max_examples=30)
@given(alpha=st.floats(0.05, 1.95), seed=st.integers(0, 2**32 - 1))
def test_cms_transform_is_odd(alpha, seed):
    rng = make_rng(seed)
    v = rng.uniform(-np.pi / 2, np.pi / 2, 64)
    w = rng.standard_exponential(64)
    assert np.allclose(stable_from_uniforms(alpha, -v, w), -stable_from_uniforms(alpha, v, w))


def test_cms_continuous_through_alpha_one():
    rng = make_rng(0)
    v = rng.uniform(-1.2, 1.2, 100)
    w = rng.standard_exponential(100)
    assert np.allclose(stable_from_uniforms(1 - 1e-7, v, w), stable_from_uniforms(1.0, v, w), rtol=1e-4, atol=1e-5)
