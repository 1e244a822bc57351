import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from hidim.convex import TabulatedConvexFunction as T
from hidim.distributions import ScalarDistribution as D
from hidim.errors import DomainError
from hidim.mft import MFTProblem, solve_rs_equations
from hidim.quadratic import (MPDensity, QuadSetting, empirical_spectrum, loglog_slope, mp_density,
                             ridge_closed_form, ridge_high_snr_asymptote, ridge_rs_fixed_point,
                             ridge_via_mp_integral)

ALPHAS = [0.25, 0.9, 1.0, 2.0, 5.0]
SNRS = [0.1, 1.0, 10.0, 1e3, 1e5]


def test_setting():
    s = QuadSetting(2.0, 4.0)
    assert s.phi == 0.25 and s.gamma == 0.25
    with pytest.raises(DomainError):
        QuadSetting(1.0, 0.0)


def test_fixed_point_examples():
    assert ridge_rs_fixed_point(QuadSetting(2.0, 1.0))[1] == pytest.approx(np.sqrt(2) - 1, abs=1e-12)
    assert ridge_rs_fixed_point(QuadSetting(1.0, 100.0))[1] == pytest.approx(
        (-0.01 + np.sqrt(0.0401)) / 2, abs=1e-12)
    q_d, qbar = ridge_rs_fixed_point(QuadSetting(2.0, 1.0))
    assert q_d == pytest.approx((1 + qbar) / 2, abs=1e-12)


def test_closed_form_examples():
    assert ridge_closed_form(QuadSetting(2.0, 100.0)) == pytest.approx(0.0098057, abs=5e-7)
    for snr in (0.5, 10.0):
        a = 1e-3
        approx = 1 - a * snr / (snr + 1)
        assert abs(ridge_closed_form(QuadSetting(a, snr)) - approx) < 10 * a * a * (1 + snr)


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("snr", SNRS)
def test_three_way_agreement(alpha, snr):
    s = QuadSetting(alpha, snr)
    c = ridge_closed_form(s)
    assert abs(ridge_rs_fixed_point(s)[1] - c) < 1e-10
    assert abs(ridge_via_mp_integral(s) - c) < 1e-6


def test_asymptote_examples():
    assert ridge_high_snr_asymptote(QuadSetting(0.9, 1e6)) == pytest.approx(0.1)
    assert ridge_high_snr_asymptote(QuadSetting(1.0, 1e4)) == pytest.approx(0.01)
    assert ridge_high_snr_asymptote(QuadSetting(2.0, 100.0)) == pytest.approx(0.01)
    with pytest.raises(DomainError):
        ridge_high_snr_asymptote(QuadSetting(2.0, 5.0))


@pytest.mark.parametrize("alpha", [0.9, 1.0, 1.1])
def test_asymptote_validity(alpha):
    s = QuadSetting(alpha, 1e6)
    c = ridge_closed_form(s)
    assert abs(c - ridge_high_snr_asymptote(s)) / c < 0.05


def test_mp_density_examples():
    m = MPDensity(4.0)
    assert (m.lambda_minus, m.lambda_plus) == pytest.approx((1.0, 9.0))
    assert MPDensity(0.25).atom_weight == pytest.approx(0.75)
    assert MPDensity(4.0).atom_weight == 0.0
    assert mp_density(4.0, 0.5) == 0.0 and mp_density(4.0, 10.0) == 0.0


@given(st.floats(0.05, 20.0))
def test_mp_mass_and_positivity(alpha):
    m = MPDensity(alpha)
    assert m.mass() == pytest.approx(1.0, abs=1e-8)
    lam = np.linspace(m.lambda_minus, m.lambda_plus, 101)
    assert np.all(m.pdf(lam) >= 0)


def test_mp_mass_by_plain_quadrature():
    m = MPDensity(0.5)
    cont = integrate.quad(m.pdf, m.lambda_minus, m.lambda_plus, limit=200)[0]
    assert cont + m.atom_weight == pytest.approx(1.0, abs=1e-8)


def test_mp_integral_limits():
    assert ridge_via_mp_integral(QuadSetting(0.5, 1e8)) == pytest.approx(0.5, abs=1e-3)
    snr = np.geomspace(1e2, 1e6, 21)
    q = [ridge_via_mp_integral(QuadSetting(1.0, x)) for x in snr]
    assert loglog_slope(snr, q) == pytest.approx(-0.5, abs=0.05)


def _mp_cdf(m, x):
    return m.atom_weight * (x >= 0) + np.array(
        [integrate.quad(m.pdf, m.lambda_minus, max(m.lambda_minus, v))[0] for v in x])


def test_empirical_spectrum_ks():
    m = MPDensity(4.0)
    ev = np.sort(empirical_spectrum(4.0, 500, seed=1))
    emp_hi = np.arange(1, ev.size + 1) / ev.size
    cdf = _mp_cdf(m, ev)
    ks = max(np.max(np.abs(emp_hi - cdf)), np.max(np.abs(emp_hi - 1 / ev.size - cdf)))
    assert ks < 0.05


def test_empirical_spectrum_rank_and_trace():
    ev = empirical_spectrum(0.5, 500, seed=2)
    assert ev.size == 500
    assert np.count_nonzero(np.abs(ev) < 1e-10) == 250
    means = [empirical_spectrum(a, 400, seed=3).mean() / a for a in (0.5, 2.0, 4.0)]
    np.testing.assert_allclose(means, 1.0, atol=0.02)
    np.testing.assert_array_equal(empirical_spectrum(2.0, 50, 9), empirical_spectrum(2.0, 50, 9))
    with pytest.raises(DomainError):
        empirical_spectrum(2.0, 2001, 0)


def test_regularization_limits_via_mft():
    # gamma -> infinity shrinks the estimate to zero: qbar -> 1
    G = D.gaussian(1.0)
    big = solve_rs_equations(MFTProblem(2.0, G, G, T.quadratic(1.0), T.quadratic(1e4))).q_s
    assert big == pytest.approx(1.0, abs=1e-3)
    # at gamma = 1/SNR the quadratic pair is optimal among ridge weights
    opt = solve_rs_equations(MFTProblem(2.0, G, G, T.quadratic(1.0), T.quadratic(1.0))).q_s
    for g in (0.5, 2.0):
        assert solve_rs_equations(MFTProblem(2.0, G, G, T.quadratic(1.0), T.quadratic(g))).q_s > opt


def test_loglog_slope_exact_power():
    x = np.geomspace(1, 1e4, 9)
    assert loglog_slope(x, 3 * x ** -0.7) == pytest.approx(-0.7, abs=1e-12)
