"""Convex scalar functions, proximal maps and Moreau envelopes.

Losses and regularizers are stored as :class:`TabulatedConvexFunction`: a
piecewise-quadratic function whose derivative is piecewise linear between
knots, may jump at knots, and continues linearly (quadratic value) beyond the
outer knots. This class is closed under everything the theory needs: the
proximal map of such a function is piecewise affine and can be computed
exactly, and constructed optimal losses are tabulated through their
derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import isotonic_regression

from . import kernels
from .errors import ConstructionError, ConvexityError, DomainError

#: Tolerated slope decrease before a tabulation is rejected as non-convex.
SLOPE_TOL = 1e-9


@dataclass(frozen=True)
class AnalyticTag:
    """Closed-form identity of a tabulated function.

    ``kind`` is ``"quadratic"`` (``weight * x**2 / 2``), ``"absolute"``
    (``weight * |x|``) or ``"zero"``.
    """

    kind: str
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in ("quadratic", "absolute", "zero"):
            raise ConstructionError(f"unknown analytic tag {self.kind!r}")
        if self.weight < 0 or not np.isfinite(self.weight):
            raise ConstructionError("analytic tag weight must be finite and >= 0")


def _as_array(a, name):
    arr = np.array(a, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ConstructionError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


class TabulatedConvexFunction:
    """Piecewise-quadratic convex function on the real line.

    Parameters
    ----------
    knots : array_like
        Strictly increasing abscissae.
    values : array_like
        Function values at the knots.
    left_slopes, right_slopes : array_like
        One-sided derivatives at the knots; unequal values mark a kink.
    tail_curvature : (float, float)
        Second derivative used beyond the first and last knot.
    tag : AnalyticTag, optional
        Enables closed-form proximal maps.
    repair : bool
        Project slope sequences that fail convexity by less than ``repair_tol``
        onto the nearest nondecreasing sequence instead of raising.

    Notes
    -----
    Values inside an interval follow from the end values and slopes, so the
    interpolant is continuous only if ``values`` are consistent with the
    trapezoidal integral of the slopes. The constructors below guarantee
    this; direct construction checks it.
    """

    __slots__ = ("knots", "values", "left_slopes", "right_slopes",
                 "tail_curvature", "tag")

    def __init__(self, knots, values, left_slopes, right_slopes,
                 tail_curvature=(0.0, 0.0), tag: Optional[AnalyticTag] = None,
                 repair=False, repair_tol=1e-6):
        knots = _as_array(knots, "knots")
        values = _as_array(values, "values")
        dl = np.array(left_slopes, dtype=float).ravel()
        dr = np.array(right_slopes, dtype=float).ravel()
        n = knots.size
        if n < 1 or values.size != n or dl.size != n or dr.size != n:
            raise ConstructionError("knots, values and slopes must have equal nonzero length")
        if not (np.all(np.isfinite(dl)) and np.all(np.isfinite(dr))):
            raise ConstructionError("slopes must be finite")
        if n > 1 and np.any(np.diff(knots) <= 0):
            raise ConstructionError("knots must be strictly increasing")
        al, ar = (float(t) for t in tail_curvature)
        if al < 0 or ar < 0:
            raise ConvexityError("tail curvatures must be nonnegative", violation=min(al, ar))

        seq = np.empty(2 * n)
        seq[0::2] = dl
        seq[1::2] = dr
        drops = np.diff(seq)
        worst = drops.min() if drops.size else 0.0
        if worst < -SLOPE_TOL:
            k = int(np.argmin(drops)) // 2
            region = (float(knots[max(k - 1, 0)]), float(knots[min(k + 1, n - 1)]))
            if repair and worst >= -repair_tol:
                seq = isotonic_regression(seq).x
                dl, dr = seq[0::2].copy(), seq[1::2].copy()
            else:
                raise ConvexityError(
                    f"slopes decrease by {-worst:.3g} near x in {region}",
                    region=region, violation=float(-worst))
        elif worst < 0:
            seq = np.maximum.accumulate(seq)
            dl, dr = seq[0::2].copy(), seq[1::2].copy()

        if n > 1:
            expected = values[:-1] + 0.5 * np.diff(knots) * (dr[:-1] + dl[1:])
            scale = 1.0 + np.abs(values[1:])
            if np.max(np.abs(expected - values[1:]) / scale) > 1e-8:
                raise ConstructionError("values are inconsistent with the slopes")
        dl.setflags(write=False)
        dr.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "left_slopes", dl)
        object.__setattr__(self, "right_slopes", dr)
        object.__setattr__(self, "tail_curvature", (al, ar))
        object.__setattr__(self, "tag", tag)

    def __setattr__(self, name, value):
        raise AttributeError("TabulatedConvexFunction is immutable")

    def __reduce__(self):
        return (type(self), (self.knots, self.values, self.left_slopes, self.right_slopes,
                             self.tail_curvature, self.tag))

    # ----------------------------------------------------------- constructors
    @classmethod
    def quadratic(cls, weight=1.0):
        """``weight * x**2 / 2``."""
        w = float(weight)
        return cls([-1.0, 0.0, 1.0], [0.5 * w, 0.0, 0.5 * w], [-w, 0.0, w], [-w, 0.0, w],
                   (w, w), AnalyticTag("quadratic", w))

    @classmethod
    def absolute(cls, weight=1.0):
        """``weight * |x|``."""
        w = float(weight)
        return cls([0.0], [0.0], [-w], [w], (0.0, 0.0), AnalyticTag("absolute", w))

    @classmethod
    def zero(cls):
        """The zero function; its proximal map is the identity."""
        return cls([0.0], [0.0], [0.0], [0.0], (0.0, 0.0), AnalyticTag("zero", 0.0))

    @classmethod
    def huber(cls, delta=1.0):
        """Huber function, quadratic on ``[-delta, delta]`` and linear outside."""
        d = float(delta)
        if d <= 0:
            raise ConstructionError("huber delta must be positive")
        return cls([-d, d], [0.5 * d * d, 0.5 * d * d], [-d, d], [-d, d], (0.0, 0.0))

    @classmethod
    def from_values(cls, knots, values, tail_slopes=None):
        """Piecewise-linear interpolant of ``values``.

        Beyond the grid the function continues linearly with the outer
        interval slopes unless ``tail_slopes = (left, right)`` is given.
        """
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.size < 2:
            raise ConstructionError("need at least two knots")
        s = np.diff(values) / np.diff(knots)
        left = s[0] if tail_slopes is None else float(tail_slopes[0])
        right = s[-1] if tail_slopes is None else float(tail_slopes[1])
        dl = np.concatenate([[left], s])
        dr = np.concatenate([s, [right]])
        return cls(knots, values, dl, dr, (0.0, 0.0))

    @classmethod
    def from_derivative(cls, knots, slopes, value_at=0.0, value=0.0,
                        tail_curvature=None, repair=False, repair_tol=1e-6):
        """Continuously differentiable tabulation from derivative samples.

        Values are the trapezoidal integral of the piecewise-linear
        derivative, shifted so that the function equals ``value`` at
        ``value_at``. Tail curvatures default to the outer interval slopes of
        the derivative.
        """
        knots = np.asarray(knots, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if knots.size < 2 or slopes.shape != knots.shape:
            raise ConstructionError("need matching knots and slopes, at least two")
        if repair:
            order_ok = np.diff(slopes).min() >= -SLOPE_TOL
            if not order_ok:
                worst = -np.diff(slopes).min()
                if worst > repair_tol:
                    k = int(np.argmin(np.diff(slopes)))
                    raise ConvexityError(
                        f"derivative decreases by {worst:.3g} near x = {knots[k]:.6g}",
                        region=(float(knots[max(k - 1, 0)]), float(knots[min(k + 2, knots.size - 1)])),
                        violation=float(worst))
                slopes = isotonic_regression(slopes).x
        h = np.diff(knots)
        vals = np.concatenate([[0.0], np.cumsum(0.5 * h * (slopes[1:] + slopes[:-1]))])
        if tail_curvature is None:
            tail_curvature = (max((slopes[1] - slopes[0]) / h[0], 0.0),
                              max((slopes[-1] - slopes[-2]) / h[-1], 0.0))
        f = cls(knots, vals, slopes, slopes, tail_curvature)
        shift = float(np.asarray(f(value_at)).ravel()[0]) - value
        return cls(knots, vals - shift, slopes, slopes, tail_curvature)

    # ------------------------------------------------------------ evaluation
    def _kernel_args(self):
        al, ar = self.tail_curvature
        return self.knots, self.left_slopes, self.right_slopes, al, ar

    def value(self, x):
        """Function value (vectorised)."""
        if self.tag is not None:
            x = np.asarray(x, dtype=float)
            w = self.tag.weight
            if self.tag.kind == "quadratic":
                return 0.5 * w * x * x
            if self.tag.kind == "absolute":
                return w * np.abs(x)
            return np.zeros_like(x)
        v, _ = kernels.evaluate(x, self.knots, self.values, self.left_slopes,
                                self.right_slopes, *self.tail_curvature)
        return v

    __call__ = value

    def derivative(self, x):
        """Derivative; at a kink the midpoint of the subdifferential."""
        if self.tag is not None:
            x = np.asarray(x, dtype=float)
            w = self.tag.weight
            if self.tag.kind == "quadratic":
                return w * x
            if self.tag.kind == "absolute":
                return w * np.sign(x)
            return np.zeros_like(x)
        _, d = kernels.evaluate(x, self.knots, self.values, self.left_slopes,
                                self.right_slopes, *self.tail_curvature)
        return d

    def curvature(self, x):
        """Absolutely continuous part of the second derivative."""
        x = np.asarray(x, dtype=float)
        k = self.knots
        n = k.size
        al, ar = self.tail_curvature
        if n == 1:
            return np.where(x < k[0], al, ar)
        m = (self.left_slopes[1:] - self.right_slopes[:-1]) / np.diff(k)
        table = np.concatenate([[al], m, [ar]])
        return table[np.searchsorted(k, x, side="right")]

    def jumps(self):
        """Positions and sizes of the derivative jumps."""
        size = self.right_slopes - self.left_slopes
        mask = size > 0
        return self.knots[mask], size[mask]

    def subdifferential(self, x, atol=0.0):
        """Lower and upper end of the subdifferential at ``x``.

        With ``atol > 0`` every kink within ``atol`` of ``x`` contributes its
        full interval; this is what an optimality certificate evaluated at an
        approximate solution needs.
        """
        x = np.asarray(x, dtype=float)
        d = np.asarray(self.derivative(x), dtype=float)
        lo = d.copy()
        hi = d.copy()
        pos, _ = self.jumps()
        if pos.size:
            i = np.searchsorted(pos, x - atol, side="left")
            i = np.clip(i, 0, pos.size - 1)
            near = np.abs(pos[i] - x) <= atol
            kl = self.left_slopes[self.right_slopes - self.left_slopes > 0]
            kr = self.right_slopes[self.right_slopes - self.left_slopes > 0]
            lo = np.where(near, np.minimum(lo, kl[i]), lo)
            hi = np.where(near, np.maximum(hi, kr[i]), hi)
        return lo, hi

    def kink_points(self, lam, lo=-np.inf, hi=np.inf, jac_tol=1e-6, max_points=400):
        """Arguments where the proximal map at scale ``lam`` has a corner.

        These are the ends of the flat windows produced by derivative jumps,
        plus the images of knots where the curvature changes enough to move
        the prox Jacobian by more than ``jac_tol``. Only the ``max_points``
        largest curvature corners are kept.
        """
        k = self.knots
        dl, dr = self.left_slopes, self.right_slopes
        jump = dr - dl > 1e-12
        pts = [k[jump] + lam * dl[jump], k[jump] + lam * dr[jump]]
        al, ar = self.tail_curvature
        m = (dl[1:] - dr[:-1]) / np.diff(k) if k.size > 1 else np.empty(0)
        m_left = np.concatenate([[al], m])
        m_right = np.concatenate([m, [ar]])
        dj = np.abs(1.0 / (1.0 + lam * m_left) - 1.0 / (1.0 + lam * m_right))
        smooth = ~jump & (dj > jac_tol)
        idx = np.flatnonzero(smooth)
        if idx.size > max_points:
            idx = idx[np.argsort(dj[idx])[-max_points:]]
        pts.append(k[idx] + lam * dl[idx])
        pts = np.sort(np.concatenate(pts))
        return pts[(pts > lo) & (pts < hi)]

    # ---------------------------------------------------------- prox family
    def prox(self, lam, x, jacobian=False):
        """Proximal map ``argmin_y (y - x)**2/(2 lam) + f(y)``.

        With ``jacobian=True`` also returns the derivative of the map, which
        lies in ``[0, 1]``.
        """
        if not lam > 0:
            raise DomainError("prox scale must be positive")
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("prox argument must be finite")
        if self.tag is not None:
            w = self.tag.weight
            if self.tag.kind == "quadratic":
                g = 1.0 / (1.0 + lam * w)
                y, jac = g * x, np.full_like(x, g)
            elif self.tag.kind == "absolute":
                t = lam * w
                y = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
                jac = (np.abs(x) > t).astype(float)
            else:
                y, jac = np.array(x, copy=True), np.ones_like(x)
        else:
            y, jac = kernels.prox(x, lam, *self._kernel_args())
            if x.ndim == 0:
                y, jac = y[()], jac[()]
        return (y, jac) if jacobian else y

    def prox_jacobian(self, lam, x):
        """Derivative of the proximal map, in ``[0, 1]``."""
        return np.clip(self.prox(lam, x, jacobian=True)[1], 0.0, 1.0)

    def moreau(self, lam, x):
        """Moreau envelope ``min_y (y - x)**2/(2 lam) + f(y)``."""
        x = np.asarray(x, dtype=float)
        y = self.prox(lam, x)
        return (y - x) ** 2 / (2.0 * lam) + self.value(y)

    def moreau_grad(self, lam, x):
        """Derivative of the Moreau envelope, ``(x - prox(x)) / lam``."""
        x = np.asarray(x, dtype=float)
        return (x - self.prox(lam, x)) / lam

    def conjugate_prox(self, lam, x):
        """Proximal map of the convex conjugate, via Moreau decomposition."""
        x = np.asarray(x, dtype=float)
        return x - lam * self.prox(1.0 / lam, x / lam)

    # --------------------------------------------------------------- helpers
    def minimum(self):
        """Minimiser and minimum value."""
        if self.tag is not None:
            return 0.0, 0.0
        k, v, dl, dr = self.knots, self.values, self.left_slopes, self.right_slopes
        al, ar = self.tail_curvature
        # A minimiser is where the subdifferential contains zero.
        on = np.nonzero((dl <= 0) & (dr >= 0))[0]
        if on.size:
            i = on[np.argmin(v[on])]
            return float(k[i]), float(v[i])
        if dl[0] > 0:
            if al <= 0:
                raise DomainError("function is unbounded below on the left")
            t = -dl[0] / al
            return float(k[0] + t), float(v[0] + dl[0] * t + 0.5 * al * t * t)
        if dr[-1] < 0:
            if ar <= 0:
                raise DomainError("function is unbounded below on the right")
            t = -dr[-1] / ar
            return float(k[-1] + t), float(v[-1] + dr[-1] * t + 0.5 * ar * t * t)
        j = int(np.nonzero((dr[:-1] < 0) & (dl[1:] > 0))[0][0])
        m = (dl[j + 1] - dr[j]) / (k[j + 1] - k[j])
        t = -dr[j] / m
        return float(k[j] + t), float(v[j] + dr[j] * t + 0.5 * m * t * t)

    def shifted(self, c):
        """``f - c``."""
        return TabulatedConvexFunction(self.knots, self.values - c, self.left_slopes,
                                       self.right_slopes, self.tail_curvature, self.tag)

    def normalized(self):
        """Copy shifted so that its minimum value is zero."""
        return self.shifted(self.minimum()[1])

    def untagged(self):
        """Same tabulation with the closed-form fast path disabled."""
        return TabulatedConvexFunction(self.knots, self.values, self.left_slopes,
                                       self.right_slopes, self.tail_curvature, None)

    # ---------------------------------------------------------- serialization
    def to_dict(self):
        tag = None if self.tag is None else {"kind": self.tag.kind, "weight": self.tag.weight}
        return {
            "knots": self.knots.tolist(),
            "values": self.values.tolist(),
            "left_slopes": self.left_slopes.tolist(),
            "right_slopes": self.right_slopes.tolist(),
            "tail_curvature": list(self.tail_curvature),
            "tag": tag,
        }

    @classmethod
    def from_dict(cls, d):
        """Inverse of :meth:`to_dict`.

        A document with only ``knots`` and ``values`` is read as a
        piecewise-linear interpolant; a tag alone rebuilds the closed form.
        """
        tag = d.get("tag")
        if isinstance(tag, str):
            tag = {"kind": tag, "weight": d.get("weight", 1.0)}
        if tag is not None and "knots" not in d:
            kind, w = tag["kind"], tag.get("weight", 1.0)
            return {"quadratic": cls.quadratic, "absolute": cls.absolute}.get(
                kind, lambda _w: cls.zero())(w)
        try:
            knots, values = d["knots"], d["values"]
        except KeyError as exc:
            raise ConstructionError(f"function document lacks {exc}") from None
        if "left_slopes" not in d:
            return cls.from_values(knots, values)
        tag_obj = None if tag is None else AnalyticTag(tag["kind"], tag.get("weight", 1.0))
        return cls(knots, values, d["left_slopes"], d["right_slopes"],
                   tuple(d.get("tail_curvature", (0.0, 0.0))), tag_obj)

    def __eq__(self, other):
        if not isinstance(other, TabulatedConvexFunction):
            return NotImplemented
        return (self.tag == other.tag and self.tail_curvature == other.tail_curvature
                and np.array_equal(self.knots, other.knots)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.left_slopes, other.left_slopes)
                and np.array_equal(self.right_slopes, other.right_slopes))

    __hash__ = None

    def __repr__(self):
        if self.tag is not None:
            return f"TabulatedConvexFunction({self.tag.kind}, weight={self.tag.weight:g})"
        return (f"TabulatedConvexFunction({self.knots.size} knots on "
                f"[{self.knots[0]:.4g}, {self.knots[-1]:.4g}])")


# --------------------------------------------------------------- module API
def prox(f, lam, x):
    return f.prox(lam, x)


def moreau(f, lam, x):
    return f.moreau(lam, x)


def moreau_grad(f, lam, x):
    return f.moreau_grad(lam, x)


def prox_jacobian(f, lam, x):
    return f.prox_jacobian(lam, x)


class TabulatedEnergy:
    """A (not necessarily convex) energy known through value and derivative
    callables, with a default evaluation grid."""

    def __init__(self, value, derivative, grid, tail_curvature=None):
        self.value = value
        self.derivative = derivative
        self.grid = np.asarray(grid, dtype=float)
        self.tail_curvature = tail_curvature


def negate_and_envelope(energy, q, grid=None, repair_tol=1e-6):
    """Tabulate ``x -> -min_y [(y - x)**2/(2 q) - E(y)]``.

    Parameters
    ----------
    energy : object
        Provides ``value(y)`` and ``derivative(y)``; a ``grid`` attribute is
        used when ``grid`` is not given, and ``tail_curvature`` (if present)
        for the coercivity check.
    q : float
        Smoothing scale, positive.
    grid : array_like, optional
        Abscissae ``y`` at which the inner problem is solved.

    Returns
    -------
    TabulatedConvexFunction

    Notes
    -----
    Wherever the inner maximisation is concave its maximiser ``y`` solves
    ``x = y - q E'(y)``, and the envelope derivative there is ``E'(y)``. The
    knots are therefore the images of ``grid`` under that map. If the map is
    not monotone the maximisation is done by brute force over ``grid``.
    """
    if not q > 0:
        raise DomainError("smoothing scale q must be positive")
    y = np.asarray(energy.grid if grid is None else grid, dtype=float)
    if y.size < 3:
        raise DomainError("need at least three grid points")
    tails = getattr(energy, "tail_curvature", None)
    if tails is not None and max(tails) >= 1.0 / q:
        raise DomainError("inner objective is not coercive: energy curvature at the "
                          f"tails ({max(tails):.3g}) reaches 1/q = {1.0 / q:.3g}")
    e = np.asarray(energy.value(y), dtype=float)
    de = np.asarray(energy.derivative(y), dtype=float)
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(de))):
        raise DomainError("energy is not finite on the grid")
    x = y - q * de
    if np.all(np.diff(x) > 0):
        ystar, slopes = y, de
    else:
        x, ystar = _envelope_brute_force(y, e, q)
        slopes = (ystar - x) / q
    if x[-1] <= x[-2] or x[1] <= x[0]:
        raise DomainError("inner objective is not coercive at the grid ends")
    c = x.size // 2
    centre = float(np.asarray(energy.value(ystar[c]))) - (ystar[c] - x[c]) ** 2 / (2.0 * q)
    return TabulatedConvexFunction.from_derivative(
        x, slopes, value_at=x[c], value=centre, repair=True, repair_tol=repair_tol)


def _envelope_brute_force(y, e, q, chunk=512):
    # Global maximisation of E(y) - (y - x)^2/(2q) over the grid, for x on a
    # uniform grid with the same span.
    xs = np.linspace(y[0], y[-1], y.size)
    best = np.empty(xs.size)
    for s in range(0, xs.size, chunk):
        xc = xs[s:s + chunk]
        obj = e[None, :] - (y[None, :] - xc[:, None]) ** 2 / (2.0 * q)
        best[s:s + chunk] = y[np.argmax(obj, axis=1)]
    return xs, best
