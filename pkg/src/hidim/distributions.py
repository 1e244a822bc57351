"""Scalar signal and noise distributions and their Gaussian convolutions.

A :class:`ScalarDistribution` is a zero-mean prior (Gaussian, Laplacian or a
tabulated convex energy). :class:`ConvolvedDensity` is the law of
``t + sqrt(q) z`` for ``t`` drawn from a base distribution and standard
normal ``z``; it exposes the log-density, score and score derivative, from
which posterior means (Tweedie) and the Fisher information follow.

Gaussian and Laplacian convolutions are evaluated in closed form; custom
bases are convolved by panel quadrature and interpolated.
"""

from __future__ import annotations

import warnings
from enum import Enum

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .convex import TabulatedConvexFunction, TabulatedEnergy
from .errors import ConstructionError, DomainError, NumericalError
from .quadrature import DEFAULT_POINTS, PanelRule, build_edges, refine_edges

_LOG_2PI = np.log(2.0 * np.pi)
#: Energy rise above the minimum at which a custom density is truncated.
_CUSTOM_TAIL_ENERGY = 60.0
#: Half-width of the Laplacian window in units of the scale (mass beyond is e^-40).
_LAPLACE_WINDOW = 40.0
#: Half-width of Gaussian windows in standard deviations.
_GAUSS_WINDOW = 10.0
#: Knot count for tabulations built from a distribution (constructed losses).
DEFAULT_KNOTS = 8001


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"
    CUSTOM = "custom"


class ExtrapolationWarning(UserWarning):
    """A tabulated density was evaluated outside its grid."""


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class ScalarDistribution:
    """Zero-mean scalar prior.

    Parameters
    ----------
    family : Family or str
    scale : float
        Standard deviation for Gaussian; ``b`` in ``exp(-|x|/b)`` for
        Laplacian; ignored for custom.
    custom_energy : TabulatedConvexFunction, optional
        ``E = -log P`` up to a constant, for the custom family.
    """

    __slots__ = ("family", "scale", "custom_energy", "_cache")

    def __init__(self, family, scale=1.0, custom_energy=None):
        family = Family(family)
        scale = float(scale)
        if family is not Family.CUSTOM and not (scale > 0 and np.isfinite(scale)):
            raise ConstructionError("scale must be positive and finite")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "custom_energy", custom_energy)
        object.__setattr__(self, "_cache", {})
        if family is Family.CUSTOM:
            if custom_energy is None:
                raise ConstructionError("custom family needs a tabulated energy")
            self._normalize_custom()

    def __setattr__(self, name, value):
        raise AttributeError("ScalarDistribution is immutable")

    def __reduce__(self):
        return (type(self), (self.family, self.scale, self.custom_energy))

    @classmethod
    def gaussian(cls, scale=1.0):
        return cls(Family.GAUSSIAN, scale)

    @classmethod
    def laplacian(cls, scale=1.0):
        return cls(Family.LAPLACIAN, scale)

    @classmethod
    def custom(cls, energy):
        return cls(Family.CUSTOM, 1.0, energy)

    # ------------------------------------------------------------ spec I/O
    @classmethod
    def from_spec(cls, spec):
        """Build from ``{"family": ..., "scale": ...}`` or
        ``{"family": "custom", "energy_grid": [[x, E], ...]}``."""
        try:
            family = Family(str(spec["family"]).lower())
        except (KeyError, ValueError) as exc:
            raise ConstructionError(f"bad distribution spec {spec!r}") from exc
        if family is Family.CUSTOM:
            grid = np.asarray(spec.get("energy_grid", ()), dtype=float)
            if grid.ndim != 2 or grid.shape[1] != 2 or grid.shape[0] < 3:
                raise ConstructionError("energy_grid must be a list of at least three [x, E] pairs")
            return cls.custom(TabulatedConvexFunction.from_values(grid[:, 0], grid[:, 1]))
        return cls(family, spec.get("scale", 1.0))

    def to_spec(self):
        if self.family is Family.CUSTOM:
            e = self.custom_energy
            return {"family": "custom",
                    "energy_grid": np.column_stack([e.knots, e.values]).tolist()}
        return {"family": self.family.value, "scale": self.scale}

    def scaled(self, factor):
        """Distribution of ``factor * t``."""
        factor = float(factor)
        if not factor > 0:
            raise DomainError("scale factor must be positive")
        if self.family is not Family.CUSTOM:
            return ScalarDistribution(self.family, self.scale * factor)
        e = self.custom_energy
        return ScalarDistribution.custom(TabulatedConvexFunction(
            e.knots * factor, e.values, e.left_slopes / factor, e.right_slopes / factor,
            tuple(a / factor ** 2 for a in e.tail_curvature)))

    def __eq__(self, other):
        if not isinstance(other, ScalarDistribution):
            return NotImplemented
        return (self.family == other.family and self.scale == other.scale
                and self.custom_energy == other.custom_energy)

    def __hash__(self):
        return hash((self.family, self.scale))

    def __repr__(self):
        if self.family is Family.CUSTOM:
            return f"ScalarDistribution(custom, {self.custom_energy!r})"
        return f"ScalarDistribution({self.family.value}, scale={self.scale:g})"

    # ------------------------------------------------------- custom support
    def _normalize_custom(self):
        e = self.custom_energy
        xmin, emin = e.minimum()
        lo = self._custom_tail(xmin, emin, -1.0)
        hi = self._custom_tail(xmin, emin, +1.0)
        pos, _ = e.jumps()
        edges = build_edges(lo, hi, DEFAULT_POINTS, features=tuple(pos),
                            breakpoints=e.knots if e.knots.size < DEFAULT_POINTS else ())
        rule = PanelRule(edges)
        w = np.exp(-(e.value(rule.nodes) - emin)) * rule.weights
        z = w.sum()
        if not (np.isfinite(z) and z > 0):
            raise ConstructionError("custom energy does not define a normalisable density")
        self._cache["logz"] = np.log(z) - emin
        self._cache["window"] = (lo, hi)
        self._cache["rule"] = rule
        mean = float(w @ rule.nodes / z)
        self._cache["mean"] = mean
        self._cache["second_moment"] = float(w @ rule.nodes ** 2 / z)
        cdf_x = np.concatenate([[lo], rule.nodes, [hi]])
        cdf = np.concatenate([[0.0], np.cumsum(w) / z])
        cdf = np.concatenate([cdf, [1.0]])
        self._cache["cdf"] = (cdf_x, cdf)

    def _custom_tail(self, x0, e0, direction):
        e = self.custom_energy
        step = max(1.0, float(e.knots[-1] - e.knots[0]))
        x = float(e.knots[0] if direction < 0 else e.knots[-1])
        for _ in range(200):
            if float(e.value(x)) - e0 > _CUSTOM_TAIL_ENERGY:
                return x
            slope = float(e.derivative(x)) * direction
            curv = e.tail_curvature[0 if direction < 0 else 1]
            if slope <= 0 and curv <= 0:
                raise ConstructionError("custom energy does not grow in the tails; "
                                        "density is not normalisable")
            x += direction * step
        raise ConstructionError("custom energy grows too slowly to normalise")

    # ----------------------------------------------------------- densities
    @property
    def window(self):
        """Interval carrying all but a negligible fraction of the mass."""
        if self.family is Family.GAUSSIAN:
            return (-_GAUSS_WINDOW * self.scale, _GAUSS_WINDOW * self.scale)
        if self.family is Family.LAPLACIAN:
            return (-_LAPLACE_WINDOW * self.scale, _LAPLACE_WINDOW * self.scale)
        return self._cache["window"]

    @property
    def kinks(self):
        """Points where the energy is not differentiable."""
        if self.family is Family.LAPLACIAN:
            return (0.0,)
        if self.family is Family.CUSTOM:
            return tuple(float(p) for p in self.custom_energy.jumps()[0])
        return ()

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)) and not np.all(np.isinf(x) | np.isfinite(x)):
            raise DomainError("density argument must not be NaN")
        if np.any(np.isnan(x)):
            raise DomainError("density argument must not be NaN")
        if self.family is Family.GAUSSIAN:
            s = self.scale
            return -0.5 * (x / s) ** 2 - np.log(s) - 0.5 * _LOG_2PI
        if self.family is Family.LAPLACIAN:
            b = self.scale
            return -np.abs(x) / b - np.log(2.0 * b)
        with np.errstate(invalid="ignore", over="ignore"):
            out = -np.asarray(self.custom_energy.value(np.where(np.isfinite(x), x, 0.0))) \
                - self._cache["logz"]
        return np.where(np.isfinite(x), out, -np.inf)

    def pdf(self, x):
        """Density ``P(x)``; zero at infinite arguments."""
        return np.exp(self.logpdf(x))

    def energy(self, x):
        """``-log P(x)``."""
        return -self.logpdf(x)

    def score(self, x):
        """``d/dx log P``; almost-everywhere derivative, ``0`` at the Laplacian kink."""
        x = np.asarray(x, dtype=float)
        if self.family is Family.GAUSSIAN:
            return -x / self.scale ** 2
        if self.family is Family.LAPLACIAN:
            return -np.sign(x) / self.scale
        return -np.asarray(self.custom_energy.derivative(x))

    def score_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.family is Family.GAUSSIAN:
            return np.full_like(x, -1.0 / self.scale ** 2)
        if self.family is Family.LAPLACIAN:
            return np.zeros_like(x)
        return -np.asarray(self.custom_energy.curvature(x))

    def mean(self):
        if self.family is Family.CUSTOM:
            return self._cache["mean"]
        return 0.0

    def variance(self):
        if self.family is Family.GAUSSIAN:
            return self.scale ** 2
        if self.family is Family.LAPLACIAN:
            return 2.0 * self.scale ** 2
        return self._cache["second_moment"] - self._cache["mean"] ** 2

    def second_moment(self):
        """``<t^2>``; equals the variance for the zero-mean families."""
        if self.family is Family.CUSTOM:
            return self._cache["second_moment"]
        return self.variance()

    def energy_function(self):
        """``E = -log P`` (up to a constant) as a tabulated convex function.

        This is the maximum-likelihood loss / MAP regularizer for this prior.
        """
        if self.family is Family.GAUSSIAN:
            return TabulatedConvexFunction.quadratic(1.0 / self.scale ** 2)
        if self.family is Family.LAPLACIAN:
            return TabulatedConvexFunction.absolute(1.0 / self.scale)
        return self.custom_energy.normalized()

    # ------------------------------------------------------------ sampling
    def sample(self, seed, n):
        """``n`` i.i.d. draws; ``seed`` is an integer or a numpy Generator."""
        n = int(n)
        if n < 1:
            raise DomainError("sample size must be at least 1")
        rng = _rng(seed)
        if self.family is Family.GAUSSIAN:
            return rng.normal(0.0, self.scale, n)
        if self.family is Family.LAPLACIAN:
            return rng.laplace(0.0, self.scale, n)
        cdf_x, cdf = self._cache["cdf"]
        return np.interp(rng.random(n), cdf, cdf_x)

    # ---------------------------------------------------------- quadrature
    def rule(self, breakpoints=(), refine=0, feature_width=0.0):
        """Panel rule over :attr:`window` with kinks on panel boundaries."""
        lo, hi = self.window
        edges = build_edges(lo, hi, DEFAULT_POINTS, features=self.kinks,
                            feature_width=feature_width, breakpoints=breakpoints)
        for _ in range(refine):
            edges = refine_edges(edges)
        return PanelRule(edges)

    def expect(self, fn, breakpoints=()):
        """``<fn(t)>`` by quadrature."""
        r = self.rule(breakpoints)
        return r.integrate(fn(r.nodes) * self.pdf(r.nodes))


# ---------------------------------------------------------------- convolution
def _log_erfc(u):
    return np.log(2.0) + special.log_ndtr(-np.sqrt(2.0) * u)


def _laplace_terms(x, b, q):
    # log of the two exponentially tilted Gaussian tails whose sum is
    # proportional to the Laplace(b) * N(0, q) density.
    c = q / (2.0 * b * b)
    s2q = np.sqrt(2.0 * q)
    lt1 = c - x / b + _log_erfc((q / b - x) / s2q)
    lt2 = c + x / b + _log_erfc((q / b + x) / s2q)
    return lt1, lt2


def _laplace_logpdf(x, b, q):
    lt1, lt2 = _laplace_terms(x, b, q)
    return -np.log(4.0 * b) + np.logaddexp(lt1, lt2)


def _laplace_score(x, b, q):
    lt1, lt2 = _laplace_terms(x, b, q)
    return np.tanh(0.5 * (lt2 - lt1)) / b


def _laplace_score_derivative(x, b, q):
    lt1, lt2 = _laplace_terms(x, b, q)
    d = lt2 - lt1
    ad = np.abs(d)
    log_sech2 = np.log(4.0) - ad - 2.0 * np.log1p(np.exp(-ad))
    log_g = 0.5 * np.log(2.0 / (np.pi * q)) - x * x / (2.0 * q)
    sech2 = np.exp(log_sech2)
    cross = np.exp(log_sech2 + log_g - lt1) + np.exp(log_sech2 + log_g - lt2)
    return (sech2 / b - 0.5 * cross) / b


def _convolution_moments(base, q, x, chunk=128):
    """``(log p_q(x), E[t | x], Var[t | x])`` by quadrature over the base."""
    rule = base.rule(feature_width=np.sqrt(q))
    t = rule.nodes
    logw = base.logpdf(t) + np.log(rule.weights)
    logp = np.empty(x.size)
    m1 = np.empty(x.size)
    var = np.empty(x.size)
    for s in range(0, x.size, chunk):
        xc = x[s:s + chunk, None]
        lk = logw[None, :] - (xc - t[None, :]) ** 2 / (2.0 * q)
        top = lk.max(axis=1, keepdims=True)
        k = np.exp(lk - top)
        z = k.sum(axis=1)
        mean = (k @ t) / z
        logp[s:s + chunk] = np.log(z) + top[:, 0] - 0.5 * np.log(2.0 * np.pi * q)
        m1[s:s + chunk] = mean
        var[s:s + chunk] = np.maximum((k @ (t * t)) / z - mean ** 2, 0.0)
    return logp, m1, var


class ConvolvedDensity:
    """Law of ``t + sqrt(q) z`` with ``t ~ base`` and ``z ~ N(0, 1)``.

    Attributes
    ----------
    base : ScalarDistribution
    q : float
        Variance of the added Gaussian.
    grid : ndarray
        Uniform tabulation abscissae covering the window.
    """

    def __init__(self, base: ScalarDistribution, q, n_points=DEFAULT_POINTS):
        q = float(q)
        if not q >= 0 or not np.isfinite(q):
            raise DomainError("convolution variance q must be finite and >= 0")
        self.base = base
        self.q = q
        lo, hi = base.window
        pad = _GAUSS_WINDOW * np.sqrt(q)
        self.window = (lo - pad, hi + pad)
        self.grid = np.linspace(self.window[0], self.window[1], n_points)
        self._spline = None
        if base.family is Family.CUSTOM and q > 0:
            self._tabulate_custom()

    # ---------------------------------------------------------- tabulation
    def _tabulate_custom(self):
        logp, pm, pv = _convolution_moments(self.base, self.q, self.grid)
        self._spline = (CubicSpline(self.grid, logp), CubicSpline(self.grid, pm),
                        CubicSpline(self.grid, pv))
        g = self.grid
        # quadratic continuation of the log-density beyond the grid
        self._edge = []
        for i in (0, -1):
            sp = self._spline[0]
            self._edge.append((g[i], float(sp(g[i])), float(sp(g[i], 1)),
                               min(float(sp(g[i], 2)), 0.0)))

    def _custom_eval(self, x, which):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.grid[0]) & (x <= self.grid[-1])
        if not np.all(inside):
            warnings.warn("convolved density evaluated outside its tabulation grid; "
                          "using quadratic log-density extrapolation",
                          ExtrapolationWarning, stacklevel=3)
        xc = np.clip(x, self.grid[0], self.grid[-1])
        if which == "logpdf":
            out = self._spline[0](xc)
        elif which == "score":
            out = (self._spline[1](xc) - xc) / self.q
        else:
            out = (self._spline[2](xc) - self.q) / self.q ** 2
        if np.all(inside):
            return out
        out = np.array(out, dtype=float)
        for (x0, v0, d0, c0), mask in ((self._edge[0], x < self.grid[0]),
                                       (self._edge[1], x > self.grid[-1])):
            t = x[mask] - x0
            if which == "logpdf":
                out[mask] = v0 + d0 * t + 0.5 * c0 * t * t
            elif which == "score":
                out[mask] = d0 + c0 * t
            else:
                out[mask] = c0
        return out

    @property
    def tabulation(self):
        """``(grid, logdensity, score, score_derivative)`` arrays."""
        g = self.grid
        return g, self.logpdf(g), self.score(g), self.score_derivative(g)

    # ---------------------------------------------------------- evaluation
    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.q == 0.0:
            return self.base.logpdf(x)
        fam = self.base.family
        if fam is Family.GAUSSIAN:
            v = self.base.scale ** 2 + self.q
            return -0.5 * x * x / v - 0.5 * np.log(2.0 * np.pi * v)
        if fam is Family.LAPLACIAN:
            return _laplace_logpdf(x, self.base.scale, self.q)
        return self._custom_eval(x, "logpdf")

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def energy(self, x):
        return -self.logpdf(x)

    def score(self, x):
        """``d/dx log p_q``."""
        x = np.asarray(x, dtype=float)
        if self.q == 0.0:
            return self.base.score(x)
        fam = self.base.family
        if fam is Family.GAUSSIAN:
            return -x / (self.base.scale ** 2 + self.q)
        if fam is Family.LAPLACIAN:
            return _laplace_score(x, self.base.scale, self.q)
        return self._custom_eval(x, "score")

    def score_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.q == 0.0:
            return self.base.score_derivative(x)
        fam = self.base.family
        if fam is Family.GAUSSIAN:
            return np.full_like(x, -1.0 / (self.base.scale ** 2 + self.q))
        if fam is Family.LAPLACIAN:
            return _laplace_score_derivative(x, self.base.scale, self.q)
        return self._custom_eval(x, "score_derivative")

    def posterior_mean(self, x):
        """``E[t | t + sqrt(q) z = x]`` by Tweedie's identity."""
        x = np.asarray(x, dtype=float)
        if self.q == 0.0:
            return x.copy() if x.ndim else x
        return x + self.q * self.score(x)

    def posterior_variance(self, x):
        """``Var[t | x] = q + q^2 * score'(x)``."""
        x = np.asarray(x, dtype=float)
        if self.q == 0.0:
            return np.zeros_like(x)
        return np.maximum(self.q + self.q ** 2 * self.score_derivative(x), 0.0)

    def second_moment(self):
        return self.base.second_moment() + self.q

    def variance(self):
        return self.base.variance() + self.q

    def energy_function(self, n_points=DEFAULT_KNOTS, tail_points=200):
        """Energy ``-log p_q`` with a construction grid for envelopes.

        The grid is dense over ten standard deviations and sparse from there
        to the edge of :attr:`window`. For the closed-form families the
        sparse part is extended further, until the envelope abscissae
        ``y - q E'(y)`` at the ends reach ten base standard deviations; at
        large ``q`` that region sits far out in the tails of ``p_q``.
        """
        lo, hi = self.window
        if self.base.family is not Family.CUSTOM and self.q > 0:
            target = _GAUSS_WINDOW * np.sqrt(self.base.variance())
            for _ in range(60):
                if hi + self.q * float(self.score(hi)) >= target:
                    break
                hi *= 1.5
            lo = -hi
        fw = np.sqrt(self.q) if self.q > 0 else 0.0
        half = _GAUSS_WINDOW * np.sqrt(self.variance())
        core_lo, core_hi = max(lo, -half), min(hi, half)
        grid = build_edges(core_lo, core_hi, n_points, features=self.base.kinks,
                           feature_width=fw)
        if lo < core_lo:
            grid = np.concatenate([np.linspace(lo, core_lo, tail_points)[:-1], grid])
        if hi > core_hi:
            grid = np.concatenate([grid, np.linspace(core_hi, hi, tail_points)[1:]])
        tail = None
        if self.base.family is Family.GAUSSIAN:
            tail = (1.0 / self.variance(),) * 2
        return TabulatedEnergy(self.energy, lambda y: -self.score(y), grid, tail)

    # ---------------------------------------------------------- quadrature
    def rule(self, breakpoints=(), refine=0):
        lo, hi = self.window
        fw = np.sqrt(self.q) if self.q > 0 else 0.0
        edges = build_edges(lo, hi, DEFAULT_POINTS, features=self.base.kinks,
                            feature_width=fw, breakpoints=breakpoints)
        for _ in range(refine):
            edges = refine_edges(edges)
        return PanelRule(edges)

    def quadrature(self, breakpoints=(), refine=0):
        """Nodes and density-weighted weights: ``<f> = sum(w * f(nodes))``."""
        r = self.rule(breakpoints, refine)
        return r.nodes, r.weights * self.pdf(r.nodes)

    def expect(self, fn, breakpoints=()):
        x, w = self.quadrature(breakpoints)
        return w @ fn(x)

    def __repr__(self):
        return f"ConvolvedDensity({self.base!r}, q={self.q:g})"


# ----------------------------------------------------------------- module API
def density(dist, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("density argument must not be NaN")
    return dist.pdf(x)


def sample(dist, seed, n):
    return dist.sample(seed, n)


def convolve_with_gaussian(dist, q):
    if q < 0:
        raise DomainError("convolution variance q must be >= 0")
    return ConvolvedDensity(dist, q)


def posterior_mean(conv, x):
    return conv.posterior_mean(x)


def _fisher_once(d, refine):
    if isinstance(d, ConvolvedDensity):
        x, w = d.quadrature(refine=refine)
    else:
        r = d.rule(refine=refine)
        x, w = r.nodes, r.weights * d.pdf(r.nodes)
    return float(w @ d.score(x) ** 2)


def fisher_information(d, check=True, rtol=1e-6):
    """``J = <(d/dx log p)^2>`` by quadrature.

    With ``check`` the estimate is repeated on a bisected panel grid and a
    :class:`NumericalError` is raised if the two disagree by more than
    ``rtol`` (relative).
    """
    j = _fisher_once(d, 0)
    if check:
        j2 = _fisher_once(d, 1)
        if not np.isfinite(j2) or abs(j2 - j) > rtol * abs(j2):
            raise NumericalError("Fisher information quadrature did not converge",
                                 {"coarse": j, "refined": j2})
        j = j2
    if not (np.isfinite(j) and j > 0):
        raise NumericalError("Fisher information is not finite and positive", {"value": j})
    return j


def _mmse_double(dist, q, hermite_order=80):
    z, wz = np.polynomial.hermite_e.hermegauss(hermite_order)
    wz = wz / wz.sum()
    r = dist.rule(feature_width=np.sqrt(q))
    t, wt = r.nodes, r.weights * dist.pdf(r.nodes)
    conv = ConvolvedDensity(dist, q)
    total = 0.0
    chunk = max(1, 200000 // hermite_order)
    for s in range(0, t.size, chunk):
        tc = t[s:s + chunk, None]
        err = tc - conv.posterior_mean(tc + np.sqrt(q) * z[None, :])
        total += wt[s:s + chunk] @ ((err ** 2) @ wz)
    return float(total)


def mmse(dist, q, check=True, atol=1e-6):
    """Scalar MMSE of estimating ``t ~ dist`` from ``t + sqrt(q) z``.

    Computed from the Fisher identity ``q (1 - q J[p_q])``. With ``check`` it
    is recomputed by tensor quadrature over ``(t, z)`` and the two must agree
    within ``atol``.
    """
    q = float(q)
    if not q > 0:
        raise DomainError("mmse needs q > 0")
    conv = ConvolvedDensity(dist, q)
    j = fisher_information(conv, check=False)
    value = max(q * (1.0 - q * j), 0.0)
    if check:
        brute = _mmse_double(dist, q)
        if abs(brute - value) > atol:
            raise NumericalError("MMSE routes disagree",
                                 {"fisher_identity": value, "double_quadrature": brute})
    return value
