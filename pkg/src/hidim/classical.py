"""Scalar (one unknown, N measurements) asymptotics and information bounds."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .convex import TabulatedConvexFunction
from .distributions import ScalarDistribution, fisher_information, mmse
from .errors import DegenerateError, DomainError, NumericalError


class DivergentFisherWarning(UserWarning):
    """The Fisher information of a density is infinite."""


@dataclass(frozen=True)
class ScalarInferenceSetting:
    """Estimate a scalar from ``n_measurements`` noisy copies."""

    noise: ScalarDistribution
    n_measurements: int
    signal: Optional[ScalarDistribution] = None

    def __post_init__(self):
        if int(self.n_measurements) != self.n_measurements or self.n_measurements < 1:
            raise DomainError("n_measurements must be a positive integer")


def loss_moments(rho: TabulatedConvexFunction, noise: ScalarDistribution):
    """``(<rho'(eps)^2>, <rho''(eps)>)`` under the noise density.

    The second moment of the derivative kinks is taken distributionally:
    every slope jump contributes ``jump * p(kink)``.
    """
    pos, size = (np.empty(0), np.empty(0)) if rho.tag is not None else rho.jumps()
    if rho.tag is not None and rho.tag.kind == "absolute":
        pos, size = np.array([0.0]), np.array([2.0 * rho.tag.weight])
    lo, hi = noise.window
    bp = rho.knots[(rho.knots > lo) & (rho.knots < hi)] if rho.tag is None else ()
    r = noise.rule(breakpoints=bp)
    x, w = r.nodes, r.weights * noise.pdf(r.nodes)
    d1 = rho.derivative(x)
    if rho.tag is None:
        d2 = rho.curvature(x)
    elif rho.tag.kind == "quadratic":
        d2 = np.full_like(x, rho.tag.weight)
    else:
        d2 = np.zeros_like(x)
    curv = float(w @ d2) + float(size @ noise.pdf(pos)) if pos.size else float(w @ d2)
    return float(w @ d1 ** 2), curv


def asymptotic_error_unbiased(rho, setting: ScalarInferenceSetting):
    """Large-N error ``<rho'^2> / (N <rho''>^2)`` of the M-estimator with loss ``rho``."""
    m2, curv = loss_moments(rho, setting.noise)
    if not curv > 1e-14:
        raise DegenerateError("mean loss curvature vanishes under the noise density")
    return m2 / (setting.n_measurements * curv ** 2)


def cramer_rao_bound(setting: ScalarInferenceSetting):
    """``1 / (N J[eps])``; ``0`` with a :class:`DivergentFisherWarning` if ``J`` diverges."""
    try:
        j = fisher_information(setting.noise)
    except NumericalError as exc:
        if np.isfinite(exc.diagnostics.get("refined", exc.diagnostics.get("value", 0.0))):
            raise
        warnings.warn("noise Fisher information diverges; bound is 0", DivergentFisherWarning,
                      stacklevel=2)
        return 0.0
    return 1.0 / (setting.n_measurements * j)


def bayes_asymptotics(setting: ScalarInferenceSetting):
    """Effective Gaussian variance ``q_d = 1/(N J[eps])`` and the scalar MMSE at it."""
    if setting.signal is None:
        raise DomainError("Bayesian asymptotics need a signal prior")
    q_d = cramer_rao_bound(setting)
    return q_d, mmse(setting.signal, q_d)


def bayes_lower_bound(setting: ScalarInferenceSetting):
    """``1 / (N J[eps] + J[s])``."""
    if setting.signal is None:
        raise DomainError("the Bayesian bound needs a signal prior")
    return 1.0 / (setting.n_measurements * fisher_information(setting.noise)
                  + fisher_information(setting.signal))


def scalar_m_estimate(rho: TabulatedConvexFunction, y):
    """Minimise ``sum_i rho(y_i - s)`` over the scalar ``s``.

    The objective is convex, so its derivative is monotone; the root is
    bracketed by the sample range.
    """
    y = np.asarray(y, dtype=float)
    lo, hi = float(y.min()), float(y.max())
    if lo == hi:
        return lo

    def grad(s):
        return -float(np.sum(rho.derivative(y - s)))

    glo, ghi = grad(lo), grad(hi)
    if glo >= 0:
        return lo
    if ghi <= 0:
        return hi
    return optimize.brentq(grad, lo, hi, xtol=1e-14 * (1 + abs(hi)))


def simulate_scalar(rho, setting: ScalarInferenceSetting, trials, seed):
    """Empirical ``N * <(s_hat - s0)^2>`` under ``s0 = 0`` over ``trials`` draws.

    Returns the per-trial squared errors (not rescaled).
    """
    ss = np.random.SeedSequence(seed)
    errs = np.empty(trials)
    for t, child in enumerate(ss.spawn(trials)):
        eps = setting.noise.sample(np.random.default_rng(child), setting.n_measurements)
        errs[t] = scalar_m_estimate(rho, eps) ** 2
    return errs
