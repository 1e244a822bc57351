"""Ridge (quadratic loss and regularizer) theory and its random-matrix check.

For ``rho = x^2/2`` and ``sigma = x^2 / (2 SNR)`` the normalized error
``qbar = q_s / <s^2>`` is available three ways: the two-equation fixed
point, its closed-form root, and the Marchenko-Pastur average of
``1 / (1 + lambda SNR)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError

#: Largest dimension accepted by :func:`empirical_spectrum`.
MAX_SPECTRUM_DIM = 2000


@dataclass(frozen=True)
class QuadSetting:
    alpha: float
    snr: float
    noise_var: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise DomainError("alpha must be positive")
        if not (self.snr > 0 and np.isfinite(self.snr)):
            raise DomainError("snr must be positive")

    @property
    def phi(self):
        return 1.0 / self.snr

    @property
    def gamma(self):
        """Optimal ridge weight (with unit noise variance)."""
        return 1.0 / self.snr

    @property
    def signal_var(self):
        return self.snr * self.noise_var


def ridge_closed_form(setting: QuadSetting):
    """``(1 - alpha - phi + sqrt((phi + alpha - 1)^2 + 4 phi)) / 2``."""
    a, phi = setting.alpha, setting.phi
    b = phi + a - 1.0
    disc = np.sqrt(b * b + 4.0 * phi)
    # the textbook form cancels badly when b >> phi; use the conjugate there
    if b > 0:
        return 2.0 * phi / (b + disc)
    return 0.5 * (disc - b)


def ridge_rs_fixed_point(setting: QuadSetting, tol=1e-15, max_iter=100000):
    """``(q_d, qbar)`` from iterating ``q_d = (<eps^2> + q_s)/alpha``,
    ``q_s = <s^2> q_d / (<s^2> + q_d)``.

    The map is a contraction in ``q_s``; iterations continue until the
    relative update falls below ``tol``. When the contraction factor is
    close to one the iteration is accelerated by Aitken extrapolation.
    """
    a = setting.alpha
    s2, e2 = setting.signal_var, setting.noise_var

    def T(q):
        qd = (e2 + q) / a
        return s2 * qd / (s2 + qd)

    q = s2
    for _ in range(max_iter):
        q1 = T(q)
        q2 = T(q1)
        den = q2 - 2.0 * q1 + q
        nxt = q - (q1 - q) ** 2 / den if den != 0 else q2
        if not (0 < nxt <= s2):
            nxt = q2
        if abs(nxt - q) <= tol * nxt:
            q = nxt
            break
        q = nxt
    else:
        raise NumericalError("ridge fixed point did not converge", {"q_s": q})
    return (e2 + q) / a, q / s2


@dataclass(frozen=True)
class MPDensity:
    """Marchenko-Pastur law of the eigenvalues of ``X^T X`` (entries of variance 1/P)."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")

    @property
    def lambda_minus(self):
        return (np.sqrt(self.alpha) - 1.0) ** 2

    @property
    def lambda_plus(self):
        return (np.sqrt(self.alpha) + 1.0) ** 2

    @property
    def atom_weight(self):
        return max(0.0, 1.0 - self.alpha)

    def pdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        lm, lp = self.lambda_minus, self.lambda_plus
        inside = (lam > lm) & (lam < lp) & (lam > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.sqrt(np.clip((lp - lam) * (lam - lm), 0.0, None)) / (2.0 * np.pi * lam)
        return np.where(inside, v, 0.0)

    def expect(self, fn, epsrel=1e-12):
        """``<fn(lambda)>`` including the atom, by the ``sin^2`` substitution."""
        lm, lp = self.lambda_minus, self.lambda_plus
        w = lp - lm

        def integrand(theta):
            s2 = np.sin(theta) ** 2
            lam = lm + w * s2
            # d lam = 2 w sin cos d theta; sqrt((lp-lam)(lam-lm)) = w sin cos
            return fn(lam) * (2.0 * w * w * s2 * (1.0 - s2)) / (2.0 * np.pi * lam)

        val, err = integrate.quad(integrand, 0.0, 0.5 * np.pi, limit=200,
                                  epsabs=0.0, epsrel=epsrel)
        if not np.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
            raise NumericalError("Marchenko-Pastur quadrature did not converge",
                                 {"value": val, "error": err})
        return val + self.atom_weight * fn(0.0)

    def mass(self):
        return self.expect(lambda lam: np.ones_like(np.asarray(lam, dtype=float)))


def mp_density(alpha, lam):
    """Continuous part of the law at ``lam``."""
    return MPDensity(alpha).pdf(lam)


def ridge_via_mp_integral(setting: QuadSetting):
    """``qbar = <(1 + lambda SNR)^{-1}>`` under the Marchenko-Pastur law."""
    snr = setting.snr
    mp = MPDensity(setting.alpha)
    return mp.expect(lambda lam: 1.0 / (1.0 + lam * snr))


def ridge_high_snr_asymptote(setting: QuadSetting):
    """Leading large-SNR behaviour of ``qbar``."""
    if setting.snr < 10:
        raise DomainError("the high-SNR asymptote needs snr >= 10")
    a = setting.alpha
    if a < 1:
        return 1.0 - a
    if a == 1:
        return setting.snr ** -0.5
    return 1.0 / (setting.snr * (a - 1.0))


def empirical_spectrum(alpha, P, seed):
    """Eigenvalues of ``X^T X`` for a fresh ``N x P`` design, ``N = round(alpha P)``."""
    P = int(P)
    if P < 2:
        raise DomainError("P must be at least 2")
    if P > MAX_SPECTRUM_DIM:
        raise DomainError(f"P above {MAX_SPECTRUM_DIM} is not supported")
    N = int(round(alpha * P))
    if N < 1:
        raise DomainError("alpha * P rounds to zero measurements")
    X = np.random.default_rng(seed).normal(0.0, 1.0 / np.sqrt(P), (N, P))
    return np.linalg.eigvalsh(X.T @ X)


def loglog_slope(snr, qbar):
    """Least-squares slope of ``log qbar`` against ``log snr``."""
    return float(np.polyfit(np.log(snr), np.log(qbar), 1)[0])
