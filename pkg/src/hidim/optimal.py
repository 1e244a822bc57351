"""Optimal convex losses and regularizers, their fixed points, and lower bounds.

The optimal unregularized loss at density ``alpha`` is the smoothed energy
``rho_opt = -M_q[-E_{eps_q}]`` of the noise convolved with a Gaussian of
variance ``q``, where ``q`` is the minimal solution of ``q = 1/(alpha
J[eps_q])``. With a prior the pair ``(q_s, q_d)`` solves

``q_d = 1/(alpha J[eps_{q_s}])``,  ``q_s = mmse(signal, q_d)``

and both the loss and the regularizer are built the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import optimize

from .convex import TabulatedConvexFunction, negate_and_envelope
from .distributions import (ConvolvedDensity, ScalarDistribution, fisher_information,
                            mmse)
from .errors import ConvergenceError, ConvexityError, DomainError

#: Marker used in place of a loss when the measurements are noiseless.
AFFINE_CONSTRAINT = "affine-constraint"


def _j_conv(dist, q, check=False):
    return fisher_information(ConvolvedDensity(dist, q), check=check)


# ---------------------------------------------------------------- unregularized
def unregularized_bound(noise: ScalarDistribution, alpha):
    """``1 / ((alpha - 1) J[eps])``."""
    if not alpha > 1:
        raise DomainError("alpha must exceed 1")
    return 1.0 / ((alpha - 1.0) * fisher_information(noise))


def solve_qopt_unregularized(noise: ScalarDistribution, alpha, growth=1.5):
    """Minimal ``q > 0`` with ``q = 1/(alpha J[eps_q])``.

    The search starts at ``1/((alpha-1) J[eps])``, below every root by the
    convolutional Fisher inequality, and walks upward geometrically until
    the sign changes; the first bracket is then refined with Brent's method.
    """
    if not alpha > 1:
        raise DomainError("alpha must exceed 1")

    def F(q):
        return q - 1.0 / (alpha * _j_conv(noise, q))

    lo = unregularized_bound(noise, alpha)
    f_lo = F(lo)
    if abs(f_lo) <= 1e-12 * lo:
        return lo
    upper = 1e3 * noise.second_moment() + lo
    hi = lo
    f_hi = f_lo
    while f_hi < 0:
        lo, f_lo = hi, f_hi
        hi = hi * growth
        if hi > upper * growth:
            raise ConvergenceError("no root of the optimality equation below "
                                   f"{upper:.3g}", diagnostics={"alpha": alpha})
        f_hi = F(hi)
    if f_hi == 0:
        return hi
    return float(optimize.brentq(F, lo, hi, xtol=1e-15, rtol=1e-14))


def optimal_loss(noise: ScalarDistribution, q):
    """``-M_q[-E_{eps_q}]`` normalised to vanish at its minimum."""
    conv = ConvolvedDensity(noise, q)
    try:
        return negate_and_envelope(conv.energy_function(), q).normalized()
    except ConvexityError as exc:
        raise ConvexityError(f"optimal loss is not convex: {exc}", region=exc.region,
                             violation=exc.violation) from exc


def build_rho_opt_unregularized(noise: ScalarDistribution, alpha):
    """Optimal loss for unregularized inference at density ``alpha``."""
    return optimal_loss(noise, solve_qopt_unregularized(noise, alpha))


# ------------------------------------------------------------------ regularized
def _regularized_map(noise, signal, alpha, q_s):
    q_d = 1.0 / (alpha * _j_conv(noise, q_s))
    return q_d, mmse(signal, q_d, check=False)


def solve_qopt_regularized(noise, signal, alpha, damping=0.5, tol=1e-8, max_iter=500,
                           return_trace=False):
    """Optimal order parameters ``(q_s_opt, q_d_opt)``.

    Damped fixed-point iteration from ``q_s = <s^2>``; if it has not met
    ``tol`` after ``max_iter`` steps, or its steps alternate in sign for ten
    consecutive iterations, the scalar equation in ``q_s`` is bracketed and
    solved by Brent's method instead. The returned point is polished by Brent's
    method either way, so the residual is at roundoff level.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    q_s = signal.second_moment()
    trace = []
    steps = []
    ok = False
    for _ in range(max_iter):
        _, new = _regularized_map(noise, signal, alpha, q_s)
        step = new - q_s
        nxt = q_s + damping * step
        trace.append((q_s, new))
        steps.append(np.sign(step))
        if abs(nxt - q_s) <= tol * max(abs(nxt), 1e-300):
            q_s = nxt
            ok = True
            break
        q_s = nxt
        if len(steps) >= 10 and all(steps[-k] != steps[-k - 1] for k in range(1, 10)):
            break

    def G(t):
        q = np.exp(t)
        return np.log(_regularized_map(noise, signal, alpha, q)[1] / q)

    if ok:
        a, b = np.log(q_s) - 1e-4, np.log(q_s) + 1e-4
    else:
        a, b = np.log(signal.second_moment()) - 1.0, np.log(signal.second_moment()) + 1e-9
    ga, gb = G(a), G(b)
    for _ in range(80):
        if ga > 0 > gb or ga == 0 or gb == 0:
            break
        if ga <= 0:
            a -= 1.0
            ga = G(a)
        if gb >= 0:
            b += 1.0
            gb = G(b)
    if ga == 0:
        t = a
    elif gb == 0:
        t = b
    elif ga > 0 > gb:
        t = optimize.brentq(G, a, b, xtol=1e-14, rtol=1e-15)
    else:
        raise ConvergenceError("optimal fixed point not found", trace=trace)
    q_s = float(np.exp(t))
    q_d, _ = _regularized_map(noise, signal, alpha, q_s)
    return (q_s, float(q_d), trace) if return_trace else (q_s, float(q_d))


def optimality_residuals(noise, signal, alpha, q_s, q_d):
    """Relative residuals of the two optimality equations."""
    r1 = (q_d - 1.0 / (alpha * _j_conv(noise, q_s, check=True))) / q_d
    r2 = (q_s - mmse(signal, q_d)) / q_s
    return np.array([r1, r2])


def build_optimal_pair(noise, signal, alpha, q=None):
    """``(rho_opt, sigma_opt)`` at the optimal order parameters."""
    q_s, q_d = solve_qopt_regularized(noise, signal, alpha) if q is None else q
    try:
        rho = optimal_loss(noise, q_s)
    except ConvexityError as exc:
        raise ConvexityError(f"rho_opt: {exc}", exc.region, exc.violation) from exc
    try:
        sigma = optimal_loss(signal, q_d)
    except ConvexityError as exc:
        raise ConvexityError(f"sigma_opt: {exc}", exc.region, exc.violation) from exc
    return rho, sigma


def high_dim_lower_bound(noise, signal, alpha, q_s):
    """``1 / (alpha J[eps_{q_s}] + J[s0])`` at the caller's ``q_s``."""
    return 1.0 / (alpha * _j_conv(noise, q_s, check=True) + fisher_information(signal))


def optimal_train_gen(noise, signal, alpha, q_s_opt=None):
    """``(q_eps_opt, e_train, e_gen)`` of the optimal procedure."""
    if q_s_opt is None:
        q_s_opt, _ = solve_qopt_regularized(noise, signal, alpha)
    e2 = noise.second_moment()
    q_eps = mmse(noise, q_s_opt)
    return q_eps, e2 - q_eps, e2 + q_s_opt


# --------------------------------------------------------------------- noiseless
def noiseless_qopt(signal, alpha, damping=0.5, tol=1e-12, max_iter=300, floor=1e-12):
    """Optimal ``(q_s, q_d)`` for noiseless measurements at ``0 < alpha < 1``.

    Solves ``q_d = q_s / alpha`` and ``q_s = mmse(signal, q_d)`` by damped
    iteration from ``q_s = <s^2>``. The contraction factor tends to one as
    ``alpha -> 1``, so if ``max_iter`` steps do not meet ``tol`` the scalar
    equation is bracketed below the last iterate and solved by Brent's
    method. Solutions below ``floor`` are reported as exact recovery, ``(0, 0)``.
    """
    if not 0 < alpha < 1:
        raise DomainError("noiseless inference needs 0 < alpha < 1")
    q_s = signal.second_moment()
    trace = []
    for _ in range(max_iter):
        new = mmse(signal, q_s / alpha, check=False)
        nxt = q_s + damping * (new - q_s)
        trace.append(nxt)
        if nxt < floor:
            return 0.0, 0.0
        if abs(nxt - q_s) <= tol * nxt:
            return float(nxt), float(nxt / alpha)
        q_s = nxt

    def G(t):
        q = np.exp(t)
        return np.log(max(mmse(signal, q / alpha, check=False), 1e-300) / q)

    # iterates decrease monotonically towards the root, so it lies below q_s
    hi = np.log(q_s)
    if G(hi) > 0:
        raise ConvergenceError("noiseless optimality iteration did not converge", trace=trace)
    lo = hi - 1.0
    while G(lo) <= 0:
        if lo < np.log(floor):
            return 0.0, 0.0
        lo -= 2.0
    t = optimize.brentq(G, lo, hi, xtol=1e-15, rtol=1e-15)
    q = float(np.exp(t))
    return q, q / alpha


def noiseless_bound(signal, alpha):
    """``(1 - alpha) / J[s0]``; ``0`` when the Fisher information diverges."""
    if not 0 < alpha <= 1:
        raise DomainError("noiseless bound needs 0 < alpha <= 1")
    j = fisher_information(signal)
    if not np.isfinite(j):
        return 0.0
    return (1.0 - alpha) / j


# ---------------------------------------------------------------------- summary
@dataclass
class OptimalSolution:
    q_s_opt: float
    q_d_opt: float
    rho_opt: Union[TabulatedConvexFunction, str]
    sigma_opt: TabulatedConvexFunction
    q_eps_opt: float
    e_train: float
    e_gen: float
    bounds: dict = field(default_factory=dict)

    def to_dict(self):
        rho = self.rho_opt if isinstance(self.rho_opt, str) else self.rho_opt.to_dict()
        return {"q_s_opt": self.q_s_opt, "q_d_opt": self.q_d_opt, "q_eps_opt": self.q_eps_opt,
                "e_train": self.e_train, "e_gen": self.e_gen, "bounds": dict(self.bounds),
                "rho_opt": rho, "sigma_opt": self.sigma_opt.to_dict()}


def optimal_design(noise, signal, alpha, noiseless=False):
    """Optimal order parameters, functions, errors and bounds in one record."""
    if noiseless:
        q_s, q_d = noiseless_qopt(signal, alpha)
        sigma = optimal_loss(signal, q_d) if q_d > 0 else TabulatedConvexFunction.zero()
        bounds = {"noiseless": noiseless_bound(signal, alpha)}
        return OptimalSolution(q_s, q_d, AFFINE_CONSTRAINT, sigma, 0.0, 0.0, q_s, bounds)
    q_s, q_d = solve_qopt_regularized(noise, signal, alpha)
    rho, sigma = build_optimal_pair(noise, signal, alpha, (q_s, q_d))
    q_eps, e_train, e_gen = optimal_train_gen(noise, signal, alpha, q_s)
    bounds = {"high_dim": high_dim_lower_bound(noise, signal, alpha, q_s)}
    if alpha > 1:
        bounds["unregularized"] = unregularized_bound(noise, alpha)
    return OptimalSolution(q_s, q_d, rho, sigma, q_eps, e_train, e_gen, bounds)
