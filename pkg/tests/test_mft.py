import numpy as np
import pytest

from hidim.convex import TabulatedConvexFunction as T
from hidim.distributions import ScalarDistribution as D
from hidim.errors import DomainError
from hidim.mft import (MFTProblem, mf_joint_samples, predict_performance, residuals,
                       quadratic_order_parameters, solve_rs_equations, solve_unregularized)
from hidim.quadratic import QuadSetting, ridge_closed_form

G, L = D.gaussian(1.0), D.laplacian(1.0)
Q = T.quadratic(1.0)


def ridge_problem(alpha, snr):
    return MFTProblem(alpha, G, D.gaussian(np.sqrt(snr)), Q, T.quadratic(1.0 / snr))


def test_ridge_examples():
    p = solve_rs_equations(ridge_problem(2.0, 1.0))
    assert p.q_s == pytest.approx(np.sqrt(2) - 1, abs=1e-8)
    p = solve_rs_equations(ridge_problem(2.0, 100.0))
    assert p.q_s / 100.0 == pytest.approx(0.0098057, abs=5e-7)


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 4.0, 8.0])
@pytest.mark.parametrize("snr", [0.1, 1.0, 10.0, 100.0, 1000.0])
def test_ridge_grid_matches_closed_form(alpha, snr):
    p = solve_rs_equations(ridge_problem(alpha, snr))
    assert p.converged and p.residual < 1e-8
    assert p.q_s / snr == pytest.approx(ridge_closed_form(QuadSetting(alpha, snr)), abs=1e-8)


@pytest.mark.parametrize("alpha,qs", [(2.0, 1.0), (10.0, 1 / 9)])
def test_unregularized_quadratic(alpha, qs):
    prob = MFTProblem(alpha, G, G, Q, T.zero())
    p = solve_rs_equations(prob)
    assert p.q_s == pytest.approx(qs, rel=1e-8)
    assert p.lambda_rho == pytest.approx(1 / (alpha - 1), rel=1e-8)
    assert (p.q_d, p.lambda_sigma) == (p.q_s, p.lambda_rho)
    perf = predict_performance(prob, p)
    assert perf.e_gen == pytest.approx(alpha / (alpha - 1), rel=1e-8)
    assert perf.e_train == pytest.approx((alpha - 1) / alpha, rel=1e-8)


def test_unregularized_diverges_near_critical_density():
    qs = [solve_unregularized(MFTProblem(a, L, G, Q, T.zero())).q_s for a in (1.1, 1.01, 1.001)]
    assert qs[0] < qs[1] < qs[2]
    assert qs[2] == pytest.approx(2.0 / 0.001, rel=1e-6)


def test_unregularized_rejects_subcritical():
    with pytest.raises(DomainError):
        solve_unregularized(MFTProblem(1.0, G, G, Q, T.zero()))
    with pytest.raises(DomainError):
        MFTProblem(0.0, G, G, Q, Q)


@pytest.mark.parametrize("loss,reg", [(T.absolute(), T.absolute()), (T.huber(1.0), Q),
                                      (Q, T.absolute(0.5))], ids=["map", "huber-ridge", "lasso"])
def test_residuals_on_refined_grid(loss, reg):
    prob = MFTProblem(2.0, L, L, loss, reg)
    p = solve_rs_equations(prob)
    assert p.converged
    assert np.max(np.abs(residuals(prob, p, refine=1))) < 1e-8
    assert min(p.q_s, p.q_d, p.lambda_rho, p.lambda_sigma) > 0
    perf = predict_performance(prob, p)
    assert perf.e_gen == pytest.approx(p.q_s + L.second_moment(), abs=1e-10)
    assert perf.e_train < perf.e_gen


def test_tabulated_loss_matches_tagged():
    prob_t = MFTProblem(2.0, L, L, T.absolute(), T.absolute())
    tab = T.from_values([-1.0, 0.0, 1.0], [1.0, 0.0, 1.0])
    prob_n = MFTProblem(2.0, L, L, tab, tab)
    a, b = solve_rs_equations(prob_t), solve_rs_equations(prob_n)
    assert b.q_s == pytest.approx(a.q_s, rel=1e-6)
    assert b.lambda_rho == pytest.approx(a.lambda_rho, rel=1e-6)


def test_small_ridge_tends_to_unregularized():
    base = solve_unregularized(MFTProblem(2.0, L, L, Q, T.zero())).q_s
    gaps = [abs(solve_rs_equations(MFTProblem(2.0, L, L, Q, T.quadratic(g))).q_s - base)
            for g in (1e-2, 1e-3, 1e-5)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-4


def test_mf_joint_samples_match_quadrature():
    prob = MFTProblem(2.0, L, L, T.absolute(), T.absolute())
    p = solve_rs_equations(prob)
    perf = predict_performance(prob, p)
    n = 10 ** 6
    d = mf_joint_samples(prob, p, seed=3, n=n)
    err = (d["s_hat"] - d["s0"]) ** 2
    assert abs(err.mean() - p.q_s) <= 3 * err.std() / np.sqrt(n)
    tr = d["eps_hat"] ** 2
    assert abs(tr.mean() - perf.e_train) <= 3 * tr.std() / np.sqrt(n)
    e = mf_joint_samples(prob, p, seed=3, n=1000)
    np.testing.assert_array_equal(e["s_hat"], mf_joint_samples(prob, p, seed=3, n=1000)["s_hat"])


def test_order_parameters_serialise():
    p = solve_rs_equations(ridge_problem(2.0, 1.0))
    d = p.to_dict()
    assert set(d) >= {"q_s", "q_d", "lambda_rho", "lambda_sigma", "converged", "iterations",
                      "residual"}
    assert "trace" not in d and len(p.trace) == p.iterations


@pytest.mark.parametrize("alpha,snr", [(0.5, 1.0), (1.1, 1e3), (2.0, 10.0), (0.9, 1e4)])
def test_quadratic_order_parameters_solve_equations(alpha, snr):
    pr = MFTProblem(alpha, D.laplacian(1.0), D.laplacian(np.sqrt(snr)), T.quadratic(1.0),
                    T.quadratic(1.0 / snr))
    x = quadratic_order_parameters(pr)
    assert np.max(np.abs(residuals(pr, x))) < 1e-10
    assert x[0] / pr.signal.second_moment() == pytest.approx(
        ridge_closed_form(QuadSetting(alpha, snr)), rel=1e-12)


def test_quadratic_order_parameters_untagged():
    pr = MFTProblem(2.0, D.gaussian(1.0), D.gaussian(1.0), T.absolute(1.0), T.quadratic(1.0))
    assert quadratic_order_parameters(pr) is None
