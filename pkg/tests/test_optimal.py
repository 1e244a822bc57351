import numpy as np
import pytest

from hidim.convex import TabulatedConvexFunction as T
from hidim.distributions import ConvolvedDensity, ScalarDistribution as D, fisher_information
from hidim.errors import DomainError
from hidim.mft import MFTProblem, solve_rs_equations
from hidim.optimal import (AFFINE_CONSTRAINT, build_optimal_pair, build_rho_opt_unregularized,
                           high_dim_lower_bound, noiseless_bound, noiseless_qopt, optimal_design,
                           optimal_train_gen, optimality_residuals, solve_qopt_regularized,
                           solve_qopt_unregularized, unregularized_bound)
from hidim.quadratic import QuadSetting, ridge_closed_form

from helpers import even_fit_ratio

G, L = D.gaussian(1.0), D.laplacian(1.0)
X3 = np.linspace(-3, 3, 241)


def limit_slope(x):
    # q -> infinity limit of the optimal loss slope for unit Laplacian noise, from
    # the stationarity map x = 2t / (1 - t^2) of the envelope with slope t
    return (np.sqrt(1 + x * x) - 1) / x


def limit_loss(x):
    r = np.sqrt(1 + x * x)
    return r - 1 - np.log((1 + r) / 2)


def sup_to_abs(f):
    d = f.value(X3) - np.abs(X3)
    return np.max(np.abs(d - d[X3.size // 2]))


# ------------------------------------------------------------ unregularized
def test_qopt_unregularized_examples():
    assert solve_qopt_unregularized(G, 2.0) == pytest.approx(1.0, rel=1e-8)
    q = solve_qopt_unregularized(L, 2.0)
    assert q >= 1.0 and unregularized_bound(L, 2.0) == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(DomainError):
        solve_qopt_unregularized(L, 1.0)


def test_qopt_unregularized_large_alpha():
    ratios = [solve_qopt_unregularized(L, a) * a * fisher_information(L) for a in (1e2, 1e3, 1e4)]
    assert all(r > 1 for r in ratios)
    assert abs(ratios[0] - 1) > abs(ratios[1] - 1) > abs(ratios[2] - 1)
    assert ratios[2] < 1.02


@pytest.mark.parametrize("alpha", [1.5, 3.0])
def test_rho_opt_gaussian_is_quadratic(alpha):
    r = build_rho_opt_unregularized(D.gaussian(1.5), alpha)
    x = np.linspace(-7.5, 7.5, 301)
    assert np.ptp(r.value(x) - x * x / (2 * 2.25)) < 1e-8


def test_rho_opt_laplacian_limits():
    assert sup_to_abs(build_rho_opt_unregularized(L, 1e4)) < 0.05
    r = build_rho_opt_unregularized(L, 1.01)
    assert r.value(0.0) == pytest.approx(0.0, abs=1e-12)
    # near alpha = 1 the loss is quadratic at the origin with curvature 1 / <eps^2>
    assert r.curvature(0.0) == pytest.approx(0.5, rel=0.02)


@pytest.mark.parametrize("alpha,tol", [(1.01, 3e-2), (1.001, 3e-3)])
def test_rho_opt_approaches_analytic_limit(alpha, tol):
    r = build_rho_opt_unregularized(L, alpha)
    x = np.linspace(0.05, 5, 100)
    assert np.max(np.abs(r.derivative(x) - limit_slope(x))) < tol
    assert np.max(np.abs(r.derivative(-x) + limit_slope(x))) < tol


def test_rho_opt_fit_ratio_tends_to_limit_value():
    # on a fixed window the limit is not a pure quadratic; its fit ratio is ~0.0295
    lim = even_fit_ratio(X3, limit_loss(X3))
    assert 0.02 < lim < 0.04
    got = even_fit_ratio(X3, build_rho_opt_unregularized(L, 1.001).value(X3))
    assert got == pytest.approx(lim, rel=1e-2)


def test_rho_opt_smooths_as_alpha_decreases():
    alphas = [1e3, 100, 10, 5, 2, 1.5, 1.1, 1.01]
    score = [1.0 / build_rho_opt_unregularized(L, a).curvature(0.0) for a in alphas]
    assert np.all(np.diff(score) > 0)


# -------------------------------------------------------------- regularized
def test_qopt_regularized_gaussian():
    q_s, q_d = solve_qopt_regularized(G, G, 2.0)
    assert q_s == pytest.approx(np.sqrt(2) - 1, abs=1e-8)
    q_eps, e_train, e_gen = optimal_train_gen(G, G, 2.0)
    assert q_eps == pytest.approx(1 - 1 / np.sqrt(2), abs=1e-8)
    assert e_train == pytest.approx(1 / np.sqrt(2), abs=1e-8)
    assert e_gen == pytest.approx(np.sqrt(2), abs=1e-8)
    assert high_dim_lower_bound(G, G, 2.0, q_s) == pytest.approx(q_s, abs=1e-6)


def test_qopt_regularized_small_alpha():
    vals = [solve_qopt_regularized(L, L, a) for a in (1e-1, 1e-2, 1e-3)]
    s2 = L.second_moment()
    assert all(q_s < s2 for q_s, _ in vals)
    assert s2 - vals[2][0] < s2 - vals[1][0] < s2 - vals[0][0]
    j = fisher_information(ConvolvedDensity(L, s2))
    for (_, q_d), a in zip(vals, (1e-1, 1e-2, 1e-3)):
        assert q_d * a == pytest.approx(1 / j, rel=0.05)


def test_qopt_regularized_laplacian_threshold():
    q_s, _ = solve_qopt_regularized(L, L, 1.7)
    assert q_s / L.second_moment() == pytest.approx(0.4, abs=0.02)


@pytest.mark.parametrize("alpha,snr", [(0.5, 1.0), (2.0, 10.0), (4.0, 0.1)])
def test_gaussian_pair_is_quadratic(alpha, snr):
    sig = D.gaussian(np.sqrt(snr))
    q_s, q_d = solve_qopt_regularized(G, sig, alpha)
    rho, sigma = build_optimal_pair(G, sig, alpha, (q_s, q_d))
    x = np.linspace(-5, 5, 101)
    assert np.ptp(rho.value(x) - x * x / 2) < 1e-7
    assert np.ptp(sigma.value(x) - x * x / (2 * snr)) < 1e-7
    p = solve_rs_equations(MFTProblem(alpha, G, sig, rho, sigma))
    assert p.q_s / snr == pytest.approx(ridge_closed_form(QuadSetting(alpha, snr)), abs=1e-6)


def test_pair_limits():
    rho, sigma = build_optimal_pair(L, L, 1e3)
    assert sup_to_abs(rho) < 0.05 and sup_to_abs(sigma) < 0.05
    _, sigma = build_optimal_pair(L, L, 0.05)
    assert sigma.minimum()[1] == pytest.approx(0.0, abs=1e-12)
    x = np.linspace(0.05, 5, 100)
    assert np.max(np.abs(sigma.derivative(x) - limit_slope(x))) < 0.1
    _, sigma = build_optimal_pair(L, L, 1e-3)
    assert np.max(np.abs(sigma.derivative(x) - limit_slope(x))) < 5e-3


@pytest.mark.parametrize("alpha", [1.5, 3.0])
def test_posterior_mean_identity(alpha, rng):
    q_s, q_d = solve_qopt_regularized(L, L, alpha)
    rho, sigma = build_optimal_pair(L, L, alpha, (q_s, q_d))
    for f, dist, q in ((rho, L, q_s), (sigma, L, q_d)):
        conv = ConvolvedDensity(dist, q)
        x = rng.normal(0, np.sqrt(conv.variance()), 100)
        np.testing.assert_allclose(f.prox(q, x), conv.posterior_mean(x), atol=1e-5)


def test_optimal_pair_self_consistency():
    q_s, q_d = solve_qopt_regularized(L, L, 2.0)
    rho, sigma = build_optimal_pair(L, L, 2.0, (q_s, q_d))
    p = solve_rs_equations(MFTProblem(2.0, L, L, rho, sigma))
    assert p.q_s == pytest.approx(q_s, abs=1e-4)
    assert p.lambda_rho == pytest.approx(q_s, rel=1e-3)
    assert p.lambda_sigma == pytest.approx(q_d, rel=1e-3)
    assert np.max(np.abs(optimality_residuals(L, L, 2.0, q_s, q_d))) < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0, 5.0])
def test_optimal_beats_map_and_ridge(alpha):
    q_opt, q_d = solve_qopt_regularized(L, L, alpha)
    rho, sigma = build_optimal_pair(L, L, alpha, (q_opt, q_d))
    q_mft = solve_rs_equations(MFTProblem(alpha, L, L, rho, sigma)).q_s
    q_map = solve_rs_equations(MFTProblem(alpha, L, L, T.absolute(), T.absolute())).q_s
    gamma = L.second_moment() / L.second_moment()
    q_ridge = solve_rs_equations(MFTProblem(alpha, L, L, T.quadratic(1.0), T.quadratic(gamma))).q_s
    assert q_mft < q_map and q_mft < q_ridge
    bound = high_dim_lower_bound(L, L, alpha, q_map)
    assert q_map > bound


def test_bound_hierarchy():
    for a in (0.5, 2.0, 5.0):
        q_s, _ = solve_qopt_regularized(L, L, a)
        assert q_s >= high_dim_lower_bound(L, L, a, q_s) * (1 - 1e-6) >= 0
    for a in (1.5, 4.0):
        assert solve_qopt_unregularized(L, a) >= unregularized_bound(L, a)


def test_bound_vanishes_for_sharp_prior():
    vals = [high_dim_lower_bound(L, D.gaussian(s), 2.0, 0.3) for s in (1e-1, 1e-2, 1e-3)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-5


def test_optimal_design_record():
    sol = optimal_design(L, L, 2.0)
    assert sol.q_s_opt <= L.variance() and sol.q_eps_opt <= L.variance()
    assert sol.e_gen - sol.e_train == pytest.approx(sol.q_s_opt + sol.q_eps_opt, abs=1e-8)
    assert sol.e_gen == pytest.approx(L.second_moment() + sol.q_s_opt, abs=1e-10)
    d = sol.to_dict()
    assert {"q_s_opt", "q_d_opt", "bounds", "rho_opt", "sigma_opt"} <= set(d)
    assert T.from_dict(d["rho_opt"]) == sol.rho_opt


# ------------------------------------------------------------------ noiseless
def test_noiseless_gaussian():
    q_s, q_d = noiseless_qopt(G, 0.5)
    assert q_s == pytest.approx(0.5, abs=1e-8)
    assert q_d == pytest.approx(1.0, abs=1e-8)


def test_noiseless_limits_and_bounds():
    qs = [noiseless_qopt(L, a)[0] for a in (0.9, 0.99, 0.999)]
    assert qs[0] > qs[1] > qs[2]
    assert noiseless_bound(L, 0.5) == pytest.approx(0.5, rel=1e-8)
    assert noiseless_bound(L, 1.0) == 0.0
    assert noiseless_bound(G, 0.75) == pytest.approx(0.25, rel=1e-10)
    for sig in (G, L, D.laplacian(0.3), D.gaussian(2.0)):
        for a in (0.2, 0.5, 0.8):
            assert noiseless_qopt(sig, a)[0] >= noiseless_bound(sig, a) * (1 - 1e-8)
    sol = optimal_design(None, L, 0.5, noiseless=True)
    assert sol.rho_opt == AFFINE_CONSTRAINT
    with pytest.raises(DomainError):
        noiseless_qopt(L, 1.5)
