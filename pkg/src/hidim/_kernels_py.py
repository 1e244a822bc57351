"""Pure-numpy kernels for piecewise-quadratic convex functions.

A function is described by sorted ``knots``, its ``values`` there, one-sided
derivatives ``dl`` (left) and ``dr`` (right) at each knot, and tail
curvatures ``al``/``ar``. Between knots the derivative is linear, beyond the
outer knots it continues linearly with the tail curvature.

These routines are the reference implementation; :mod:`hidim._kernels` is a
compiled drop-in replacement.
"""

import numpy as np


def prox(x, lam, knots, dl, dr, al, ar):
    """Proximal map at scale ``lam`` and its derivative, elementwise in ``x``.

    The optimality condition ``(y - x)/lam + f'(y) = 0`` is monotone in ``y``;
    ``y`` sits on knot ``j`` exactly when ``x`` lies in
    ``[knots[j] + lam*dl[j], knots[j] + lam*dr[j]]``, and between two such
    windows ``y`` is an affine function of ``x``.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    n = knots.size
    c = np.empty(2 * n)
    c[0::2] = knots + lam * dl
    c[1::2] = knots + lam * dr
    idx = np.searchsorted(c, x, side="right") - 1
    j = idx // 2
    y = np.empty_like(x)
    jac = np.empty_like(x)

    left = idx < 0
    if left.any():
        g = 1.0 / (1.0 + lam * al)
        y[left] = knots[0] + (x[left] - c[0]) * g
        jac[left] = g

    on_knot = (idx >= 0) & (idx % 2 == 0)
    y[on_knot] = knots[j[on_knot]]
    jac[on_knot] = 0.0

    inside = (idx >= 0) & (idx % 2 == 1) & (j < n - 1)
    if inside.any():
        ji = j[inside]
        h = knots[ji + 1] - knots[ji]
        m = (dl[ji + 1] - dr[ji]) / h
        g = 1.0 / (1.0 + lam * m)
        y[inside] = knots[ji] + (x[inside] - c[2 * ji + 1]) * g
        jac[inside] = g

    right = idx == 2 * n - 1
    if right.any():
        g = 1.0 / (1.0 + lam * ar)
        y[right] = knots[-1] + (x[right] - c[-1]) * g
        jac[right] = g
    return y.reshape(shape), jac.reshape(shape)


def evaluate(x, knots, values, dl, dr, al, ar):
    """Function value and derivative elementwise in ``x``.

    At a knot with a jump the derivative returned is the midpoint of the
    subdifferential.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    n = knots.size
    j = np.searchsorted(knots, x, side="right") - 1
    val = np.empty_like(x)
    der = np.empty_like(x)

    left = j < 0
    if left.any():
        t = x[left] - knots[0]
        val[left] = values[0] + dl[0] * t + 0.5 * al * t * t
        der[left] = dl[0] + al * t

    right = j >= n - 1
    if right.any():
        t = x[right] - knots[-1]
        val[right] = values[-1] + dr[-1] * t + 0.5 * ar * t * t
        der[right] = dr[-1] + ar * t

    inside = ~(left | right)
    if inside.any():
        ji = j[inside]
        t = x[inside] - knots[ji]
        h = knots[ji + 1] - knots[ji]
        m = (dl[ji + 1] - dr[ji]) / h
        val[inside] = values[ji] + dr[ji] * t + 0.5 * m * t * t
        der[inside] = dr[ji] + m * t

    at_knot = np.zeros(x.size, dtype=bool)
    valid = (j >= 0) & (j < n)
    at_knot[valid] = x[valid] == knots[j[valid]]
    if at_knot.any():
        jk = j[at_knot]
        der[at_knot] = 0.5 * (dl[jk] + dr[jk])
    return val.reshape(shape), der.reshape(shape)
