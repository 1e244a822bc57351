import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from hidim.convex import TabulatedConvexFunction as T
from hidim.distributions import (ExtrapolationWarning, ScalarDistribution as D,
                                 convolve_with_gaussian, density, fisher_information, mmse,
                                 posterior_mean, sample)
from hidim.errors import ConstructionError, DomainError

# nested adaptive quadrature over (t, z) with scipy.integrate, run once and frozen
MMSE_LAPLACE_Q1 = 0.6315255772745747
MMSE_LAPLACE_Q025 = 0.21321135918519518
FISHER_LAPLACE_CONV_Q1 = 0.3684744224591455

DISTS = [D.gaussian(1.0), D.gaussian(0.5), D.laplacian(1.0), D.laplacian(1 / np.sqrt(2))]
IDS = ["G1", "G0.5", "L1", "L0.7"]


def abs_custom():
    x = np.linspace(-30, 30, 61)
    return D.custom(T.from_values(x, np.abs(x)))


# ---------------------------------------------------------------- examples
def test_density_examples():
    assert density(D.gaussian(1.0), 0.0) == pytest.approx(0.3989423, abs=1e-7)
    assert density(D.laplacian(1.0), 0.0) == pytest.approx(0.5, abs=1e-14)
    assert density(D.gaussian(1.0), 1e3) == 0.0
    with pytest.raises(DomainError):
        density(D.gaussian(), np.nan)


@pytest.mark.parametrize("dist,var", [(D.gaussian(1.0), 1.0), (D.laplacian(1.0), 2.0)])
def test_sample_variance(dist, var):
    x = sample(dist, 7, 10 ** 6)
    assert abs(x.var() / var - 1) < 0.01
    np.testing.assert_array_equal(x, sample(dist, 7, 10 ** 6))


def test_sample_rejects_bad_n():
    with pytest.raises(DomainError):
        sample(D.gaussian(), 0, 0)


def test_fisher_examples():
    assert fisher_information(D.gaussian(0.5)) == pytest.approx(4.0, rel=1e-9)
    assert fisher_information(convolve_with_gaussian(D.gaussian(1.0), 1.0)) == pytest.approx(0.5, rel=1e-9)
    assert fisher_information(D.laplacian(1.0)) == pytest.approx(1.0, rel=1e-9)
    assert fisher_information(convolve_with_gaussian(D.laplacian(1.0), 1.0)) == \
        pytest.approx(FISHER_LAPLACE_CONV_Q1, rel=1e-8)


def test_gaussian_closure():
    conv = convolve_with_gaussian(D.gaussian(1.0), 3.0)
    x = conv.grid
    assert np.max(np.abs(conv.pdf(x) - stats.norm.pdf(x, scale=2.0))) < 1e-8


def test_convolution_rejects_negative_q():
    with pytest.raises(DomainError):
        convolve_with_gaussian(D.gaussian(), -1.0)


@pytest.mark.parametrize("dist", DISTS + [abs_custom()], ids=IDS + ["custom"])
def test_zero_q_is_base(dist):
    conv = convolve_with_gaussian(dist, 0.0)
    x = np.linspace(-5, 5, 401)
    assert np.max(np.abs(conv.pdf(x) - dist.pdf(x))) < 1e-8


def test_laplace_convolution_matches_histogram():
    q = 0.5
    rng = np.random.default_rng(0)
    n = 10 ** 7
    draws = rng.laplace(0, 1, n) + np.sqrt(q) * rng.standard_normal(n)
    edges = np.linspace(-6, 6, 31)
    counts = np.histogram(draws, edges)[0]
    conv = convolve_with_gaussian(D.laplacian(1.0), q)
    p = np.array([integrate.quad(conv.pdf, a, b, epsabs=1e-13)[0]
                  for a, b in zip(edges[:-1], edges[1:])])
    se = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * se)


def test_posterior_mean_examples():
    assert posterior_mean(convolve_with_gaussian(D.gaussian(1.0), 1.0), 2.0) == pytest.approx(1.0)
    assert posterior_mean(convolve_with_gaussian(D.laplacian(1.0), 1.0), 0.0) == pytest.approx(0.0, abs=1e-14)
    x = np.linspace(-3, 3, 7)
    for d in DISTS:
        np.testing.assert_allclose(posterior_mean(convolve_with_gaussian(d, 1e-8), x), x, atol=1e-6)


def test_mmse_examples():
    assert mmse(D.gaussian(1.0), 1.0) == pytest.approx(0.5, abs=1e-9)
    assert mmse(D.laplacian(1.0), 1.0) == pytest.approx(MMSE_LAPLACE_Q1, abs=1e-8)
    assert mmse(D.laplacian(1.0), 0.25) == pytest.approx(MMSE_LAPLACE_Q025, abs=1e-8)
    assert mmse(D.laplacian(1.0), 1e-6) < 1e-5
    with pytest.raises(DomainError):
        mmse(D.gaussian(), 0.0)


# -------------------------------------------------------------- invariants
@pytest.mark.parametrize("dist", DISTS + [abs_custom()], ids=IDS + ["custom"])
def test_normalization_and_energy(dist):
    assert dist.expect(lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-8)
    r = dist.rule()
    np.testing.assert_allclose(dist.energy(r.nodes), -np.log(dist.pdf(r.nodes)), atol=1e-10)


@pytest.mark.parametrize("dist,var", [(D.gaussian(1.3), 1.69), (D.laplacian(0.7), 0.98)])
def test_variance(dist, var):
    assert dist.variance() == pytest.approx(var, abs=1e-10)


@pytest.mark.parametrize("dist", DISTS, ids=IDS)
@pytest.mark.parametrize("q", [0.01, 0.5, 4.0])
def test_convolved_variance(dist, q):
    conv = convolve_with_gaussian(dist, q)
    m2 = conv.expect(lambda x: x * x)
    assert m2 == pytest.approx(dist.variance() + q, abs=1e-6)


@pytest.mark.parametrize("v,q", [(1.0, 0.5), (2.0, 3.0)])
def test_gaussian_score(v, q):
    conv = convolve_with_gaussian(D.gaussian(np.sqrt(v)), q)
    x = conv.grid
    np.testing.assert_allclose(conv.score(x), -x / (v + q), atol=1e-8)


def test_custom_matches_laplacian():
    L, C = D.laplacian(1.0), abs_custom()
    x = np.linspace(-8, 8, 161)
    np.testing.assert_allclose(C.pdf(x), L.pdf(x), atol=1e-12)
    cl, cc = convolve_with_gaussian(L, 0.5), convolve_with_gaussian(C, 0.5)
    np.testing.assert_allclose(cc.logpdf(x), cl.logpdf(x), atol=1e-7)
    np.testing.assert_allclose(cc.score(x), cl.score(x), atol=1e-6)


def test_custom_extrapolation_is_flagged():
    conv = convolve_with_gaussian(abs_custom(), 0.5)
    with pytest.warns(ExtrapolationWarning):
        v = conv.logpdf(conv.grid[-1] + 5.0)
    assert np.isfinite(v)


def test_custom_spec_round_trip():
    spec = {"family": "custom", "energy_grid": [[-2, 4], [0, 0], [2, 4]]}
    d = D.from_spec(spec)
    assert D.from_spec(d.to_spec()) == d
    with pytest.raises(ConstructionError):
        D.from_spec({"family": "custom", "energy_grid": [[0, 0]]})
    with pytest.raises(ConstructionError):
        D.from_spec({"family": "cauchy"})


@pytest.mark.parametrize("dist", [D.laplacian(1.0), D.gaussian(1.0), D.laplacian(0.5)],
                         ids=["L1", "G1", "L0.5"])
def test_mmse_monotone_and_bounded(dist):
    qs = np.geomspace(1e-3, 30, 15)
    vals = np.array([mmse(dist, q) for q in qs])
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(vals <= np.minimum(dist.variance(), qs) + 1e-12)


@pytest.mark.parametrize("dist", DISTS, ids=IDS)
def test_fisher_inequalities(dist):
    j0 = fisher_information(dist)
    for q in (1e-3, 0.1, 1.0, 10.0):
        jq = fisher_information(convolve_with_gaussian(dist, q))
        assert jq < j0
        assert 1 / jq >= 1 / j0 + q - 1e-9


@settings(max_examples=10)
@given(st.sampled_from([0.1, 0.5, 1.0, 3.0]), st.sampled_from([0.5, 1.0, 2.0]))
def test_tweedie_matches_brute_force(q, b):
    conv = convolve_with_gaussian(D.laplacian(b), q)
    rng = np.random.default_rng(int(q * 100 + b * 10))
    xs = rng.normal(0, np.sqrt(2 * b * b + q), 100)

    def brute(x):
        def kern(t):
            return np.exp(-abs(t) / b - (x - t) ** 2 / (2 * q))
        lo, hi = x - 12 * np.sqrt(q), x + 12 * np.sqrt(q)
        pts = [0.0] if lo < 0 < hi else None
        num = integrate.quad(lambda t: t * kern(t), lo, hi, points=pts, epsabs=0, epsrel=1e-12,
                             limit=200)[0]
        den = integrate.quad(kern, lo, hi, points=pts, epsabs=0, epsrel=1e-12, limit=200)[0]
        return num / den

    expected = np.array([brute(x) for x in xs])
    np.testing.assert_allclose(conv.posterior_mean(xs), expected, atol=1e-6)


def test_custom_tweedie_matches_brute_force(rng):
    conv = convolve_with_gaussian(abs_custom(), 1.0)
    xs = rng.normal(0, 1.7, 100)
    ref = convolve_with_gaussian(D.laplacian(1.0), 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ExtrapolationWarning)
        np.testing.assert_allclose(conv.posterior_mean(xs), ref.posterior_mean(xs), atol=1e-6)


def test_posterior_variance_identity():
    # Var[t | x] = q + q^2 score'(x); check against the Gaussian conjugate value
    conv = convolve_with_gaussian(D.gaussian(1.0), 1.0)
    np.testing.assert_allclose(conv.posterior_variance(np.linspace(-3, 3, 7)), 0.5, atol=1e-12)
