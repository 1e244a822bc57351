"""Replica-symmetric mean-field equations for convex M-estimation.

For measurement density ``alpha``, loss ``rho`` and regularizer ``sigma`` the
order parameters ``(q_s, q_d, lam_rho, lam_sigma)`` satisfy

* ``q_d = <M'(eps_q)^2> / (alpha <M''(eps_q)>^2)`` with ``M`` the Moreau
  envelope of ``rho`` at scale ``lam_rho`` and ``eps_q = eps + sqrt(q_s) z``;
* ``q_s = <(s_hat - s0)^2>`` with ``s_hat = prox(sigma, lam_sigma, s0 + sqrt(q_d) z)``;
* ``1 - lam_rho / (alpha lam_sigma) = <d eps_hat / d eps_q>``;
* ``lam_rho / lam_sigma = <d s_hat / d s_q>``.

All averages are one-dimensional quadratures over the Gaussian-convolved
noise and signal densities.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np
from scipy import optimize

from .convex import TabulatedConvexFunction
from .distributions import ConvolvedDensity, ScalarDistribution
from .errors import ConvergenceError, DomainError, NumericalError

#: Residual below which a solution counts as converged.
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class MFTProblem:
    alpha: float
    noise: ScalarDistribution
    signal: ScalarDistribution
    loss: TabulatedConvexFunction
    regularizer: TabulatedConvexFunction

    def __post_init__(self):
        if not self.alpha > 0 or not np.isfinite(self.alpha):
            raise DomainError("alpha must be positive and finite")

    @property
    def unregularized(self):
        tag = self.regularizer.tag
        return tag is not None and (tag.kind == "zero" or tag.weight == 0.0)


@dataclass
class OrderParameters:
    q_s: float
    q_d: float
    lambda_rho: float
    lambda_sigma: float
    converged: bool = False
    iterations: int = 0
    residual: float = float("inf")
    flags: List[str] = field(default_factory=list)
    trace: Optional[list] = field(default=None, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("trace")
        return d


@dataclass(frozen=True)
class PerformancePrediction:
    q_s: float
    q_eps: float
    e_train: float
    e_gen: float

    def to_dict(self):
        return asdict(self)


# ------------------------------------------------------------------ averages
def prox_kinks(f: TabulatedConvexFunction, lam):
    """Corners of ``x -> prox(f, lam, x)``."""
    if f.tag is not None:
        if f.tag.kind == "absolute" and f.tag.weight > 0:
            t = lam * f.tag.weight
            return np.array([-t, t])
        return np.empty(0)
    return f.kink_points(lam)


def _mean_jacobian(f, lam, conv, x, w, y):
    # Tagged maps have exact piecewise-constant Jacobians whose jumps sit on
    # panel edges. For tabulations the Jacobian jumps at every knot image, so
    # the Stein form <f'> = -<f * score> (integrand continuous) is used.
    if f.tag is not None:
        return float(w @ f.prox_jacobian(lam, x))
    return float(-(w @ (y * conv.score(x))))


def noise_channel(problem: MFTProblem, q_s, lam_rho, refine=0, full=False):
    """Averages over ``eps_q = eps + sqrt(q_s) z`` needed by the equations.

    Returns a dict with ``jac`` (``<eps_hat'>``) and ``grad2``
    (``<M'^2>``); with ``full`` also ``q_eps`` and ``e_train``.
    """
    conv = ConvolvedDensity(problem.noise, q_s)
    rho = problem.loss
    x, w = conv.quadrature(breakpoints=prox_kinks(rho, lam_rho), refine=refine)
    y = rho.prox(lam_rho, x)
    out = {"jac": _mean_jacobian(rho, lam_rho, conv, x, w, y),
           "grad2": float(w @ ((x - y) / lam_rho) ** 2)}
    if full:
        pm = conv.posterior_mean(x)
        out["q_eps"] = float(w @ ((y - pm) ** 2 + conv.posterior_variance(x)))
        out["e_train"] = float(w @ y ** 2)
    return out


def signal_channel(problem: MFTProblem, q_d, lam_sigma, refine=0):
    """``q_s`` right-hand side and ``<s_hat'>`` over ``s_q = s0 + sqrt(q_d) z``."""
    conv = ConvolvedDensity(problem.signal, q_d)
    sig = problem.regularizer
    x, w = conv.quadrature(breakpoints=prox_kinks(sig, lam_sigma), refine=refine)
    y = sig.prox(lam_sigma, x)
    err = (y - conv.posterior_mean(x)) ** 2 + conv.posterior_variance(x)
    return {"q_s": float(w @ err), "jac": _mean_jacobian(sig, lam_sigma, conv, x, w, y)}


def _q_d_from(nc, alpha, lam_rho):
    curv = (1.0 - nc["jac"]) / lam_rho
    if not curv > 0:
        raise NumericalError("mean envelope curvature is not positive",
                             {"jac": nc["jac"], "lambda_rho": lam_rho})
    return nc["grad2"] / (alpha * curv ** 2)


def residuals(problem: MFTProblem, params, refine=0):
    """Relative residuals of the four equations (order: q_d, q_s, eps-jac, s-jac)."""
    q_s, q_d, lr, ls = (params.q_s, params.q_d, params.lambda_rho, params.lambda_sigma) \
        if isinstance(params, OrderParameters) else params
    nc = noise_channel(problem, q_s, lr, refine)
    sc = signal_channel(problem, q_d, ls, refine)
    curv = (1.0 - nc["jac"]) / lr
    return np.array([
        (q_d - nc["grad2"] / (problem.alpha * curv ** 2)) / q_d,
        (q_s - sc["q_s"]) / q_s,
        1.0 - lr / (problem.alpha * ls) - nc["jac"],
        lr / ls - sc["jac"],
    ])


def solve_lambda_rho(problem, q_s, target, lo=1e-6, hi=1e6):
    """``lam_rho`` such that ``<eps_hat'>(q_s, lam_rho) = target``.

    The mean Jacobian decreases in ``lam_rho``; targets outside the range
    attained on ``[lo, hi]`` are clamped to the nearer end.
    """
    def f(t):
        return noise_channel(problem, q_s, np.exp(t))["jac"] - target

    a, b = np.log(lo), np.log(hi)
    fa, fb = f(a), f(b)
    if fa <= 0:
        return lo, True
    if fb >= 0:
        return hi, True
    t = optimize.brentq(f, a, b, xtol=1e-13, rtol=1e-15)
    return float(np.exp(t)), False


# ------------------------------------------------------------------ solvers
def quadratic_order_parameters(problem: MFTProblem):
    """Closed-form ``(q_s, q_d, lam_rho, lam_sigma)`` for a quadratic loss and regularizer.

    With ``rho = a x^2/2`` and ``sigma = b x^2/2`` both proxes are linear;
    ``g = lam_rho/lam_sigma`` is the smaller root of
    ``a g^2 - (a (1 + alpha) + b) g + a alpha = 0`` and the remaining
    parameters follow from second moments only. Returns ``None`` when either
    function is not tagged quadratic.
    """
    lt, rt = problem.loss.tag, problem.regularizer.tag
    if lt is None or rt is None or lt.kind != "quadratic" or rt.kind != "quadratic":
        return None
    a, b, alpha = lt.weight, rt.weight, problem.alpha
    if not (a > 0 and b > 0):
        return None
    e2, s2 = problem.noise.second_moment(), problem.signal.second_moment()
    c = a * (1.0 + alpha) + b
    g = 2.0 * a * alpha / (c + np.sqrt(c * c - 4.0 * a * a * alpha))
    q_s = ((1.0 - g) ** 2 * s2 + g * g * e2 / alpha) / (1.0 - g * g / alpha)
    q_d = (e2 + q_s) / alpha
    lam_rho = (1.0 / (1.0 - g / alpha) - 1.0) / a
    return q_s, q_d, lam_rho, lam_rho / g


def _initial(problem):
    s2 = problem.signal.second_moment()
    e2 = problem.noise.second_moment()
    return s2, (e2 + s2) / problem.alpha, 1.0, 2.0


def solve_rs_equations(problem: MFTProblem, initial=None, damping=0.5, max_sweeps=500,
                       picard_tol=1e-8, polish=True, tol=RESIDUAL_TOL, raise_on_failure=True):
    """Solve the four self-consistency equations.

    Damped Picard sweeps: from ``q_d`` and ``lam_sigma`` update ``q_s`` and
    ``r = lam_rho/lam_sigma``; solve for ``lam_rho`` at the new ``q_s``;
    update ``q_d``; relax all four unknowns by ``damping``. If the sweeps stop
    with a residual above ``tol`` the system is polished by a Powell hybrid
    root solve in log coordinates, started from the last sweep.

    Parameters
    ----------
    initial : tuple, optional
        ``(q_s, q_d, lam_rho, lam_sigma)`` warm start.

    Raises
    ------
    ConvergenceError
        If the final residual exceeds ``tol`` (unless ``raise_on_failure`` is
        false, in which case ``converged`` is ``False``).
    """
    if problem.unregularized:
        return solve_unregularized(problem, tol=tol, raise_on_failure=raise_on_failure)
    alpha = problem.alpha
    q_s, q_d, lr, ls = _initial(problem) if initial is None else map(float, initial)
    flags = []
    trace = []
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        sc = signal_channel(problem, q_d, ls)
        q_s_new = max(sc["q_s"], 1e-300)
        r = sc["jac"]
        target = 1.0 - r / alpha
        if not 0.0 < target < 1.0:
            flags.append("jacobian target clamped")
            target = min(max(target, 1e-12), 1.0 - 1e-12)
        lr_new, clamped = solve_lambda_rho(problem, q_s_new, target)
        if clamped:
            flags.append("lambda_rho clamped")
        nc = noise_channel(problem, q_s_new, lr_new)
        q_d_new = _q_d_from(nc, alpha, lr_new)
        ls_new = lr_new / max(r, 1e-300)
        new = np.array([q_s_new, q_d_new, lr_new, ls_new])
        old = np.array([q_s, q_d, lr, ls])
        # relax in log space so iterates stay positive
        mixed = np.exp(damping * np.log(new) + (1.0 - damping) * np.log(old))
        change = float(np.max(np.abs(new - old) / np.abs(new)))
        q_s, q_d, lr, ls = mixed
        trace.append((q_s, q_d, lr, ls, change))
        if change < picard_tol:
            break
    x = np.array([q_s, q_d, lr, ls])
    res = np.max(np.abs(residuals(problem, x)))
    if res > tol and polish:
        sol = optimize.root(lambda z: residuals(problem, np.exp(z)), np.log(x),
                            method="hybr", options={"xtol": 1e-13})
        cand = np.exp(sol.x)
        cres = np.max(np.abs(residuals(problem, cand)))
        if np.all(np.isfinite(cand)) and cres < res:
            x, res = cand, cres
            flags.append("polished")
    params = OrderParameters(*map(float, x), converged=bool(res < tol), iterations=sweeps,
                             residual=float(res), flags=sorted(set(flags)), trace=trace)
    if not params.converged and raise_on_failure:
        raise ConvergenceError("mean-field equations did not converge", trace=trace,
                               diagnostics={"residual": params.residual})
    return params


def solve_unregularized(problem: MFTProblem, tol=RESIDUAL_TOL, raise_on_failure=True):
    """Reduced system for ``sigma = 0`` (requires ``alpha > 1``).

    With no regularizer ``q_d = q_s`` and ``lam_sigma = lam_rho``. For each
    ``q`` the scale ``lam_rho(q)`` is fixed by ``<eps_hat'> = 1 - 1/alpha``,
    and ``q`` solves ``q = <M'^2> / (alpha <M''>^2)``, found by a bracketed
    root search in ``log q``.
    """
    alpha = problem.alpha
    if not alpha > 1:
        raise DomainError("no unregularized solution at or below critical density alpha = 1")
    target = 1.0 - 1.0 / alpha

    def h(q):
        lr, clamped = solve_lambda_rho(problem, q, target)
        return _q_d_from(noise_channel(problem, q, lr), alpha, lr), lr

    def g(t):
        q = np.exp(t)
        return np.log(h(q)[0] / q)

    e2 = problem.noise.second_moment()
    t0 = np.log(e2 / (alpha - 1.0))
    lo, hi = t0 - 1.0, t0 + 1.0
    glo, ghi = g(lo), g(hi)
    for _ in range(60):
        if glo > 0:
            break
        lo -= 2.0
        glo = g(lo)
    for _ in range(60):
        if ghi < 0:
            break
        hi += 2.0
        ghi = g(hi)
    if not (glo > 0 > ghi):
        raise ConvergenceError("could not bracket the unregularized fixed point",
                               diagnostics={"bracket": (lo, hi), "values": (glo, ghi)})
    t, info = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15, full_output=True)
    q = float(np.exp(t))
    q_new, lr = h(q)
    nc = noise_channel(problem, q, lr)
    res = max(abs(q_new - q) / q, abs(nc["jac"] - target))
    params = OrderParameters(q, q, lr, lr, converged=bool(res < tol),
                             iterations=int(info.iterations), residual=float(res))
    if not params.converged and raise_on_failure:
        raise ConvergenceError("unregularized fixed point did not converge",
                               diagnostics={"residual": res})
    return params


def predict_performance(problem: MFTProblem, params: OrderParameters) -> PerformancePrediction:
    """Noise-estimate error ``q_eps``, training and generalization errors."""
    nc = noise_channel(problem, params.q_s, params.lambda_rho, full=True)
    return PerformancePrediction(q_s=params.q_s, q_eps=nc["q_eps"], e_train=nc["e_train"],
                                 e_gen=params.q_s + problem.noise.second_moment())


def mf_joint_samples(problem: MFTProblem, params: OrderParameters, seed, n):
    """Draws from the mean-field joint laws of ``(eps, eps_hat)`` and ``(s0, s_hat)``.

    Returns
    -------
    dict of ndarray
        ``eps``, ``eps_hat``, ``s0``, ``s_hat``.
    """
    rng = np.random.default_rng(seed)
    eps = problem.noise.sample(rng, n)
    eps_hat = problem.loss.prox(params.lambda_rho, eps + np.sqrt(params.q_s) * rng.standard_normal(n))
    s0 = problem.signal.sample(rng, n)
    s_hat = problem.regularizer.prox(params.lambda_sigma,
                                     s0 + np.sqrt(params.q_d) * rng.standard_normal(n))
    return {"eps": eps, "eps_hat": eps_hat, "s0": s0, "s_hat": s_hat}
