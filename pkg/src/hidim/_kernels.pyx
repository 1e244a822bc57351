# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for piecewise-quadratic convex functions.

Same contract as :mod:`hidim._kernels_py`; the knot windows are located by
an in-place binary search instead of materialising them.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _locate(double x, double lam, const double[::1] knots,
                               const double[::1] dl, const double[::1] dr,
                               Py_ssize_t n) noexcept nogil:
    # Largest i in [-1, 2n-1] with c[i] <= x, where c interleaves the
    # left and right window ends of each knot.
    cdef Py_ssize_t lo = -1, hi = 2 * n - 1, mid, k
    cdef double c
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        k = mid >> 1
        if mid & 1:
            c = knots[k] + lam * dr[k]
        else:
            c = knots[k] + lam * dl[k]
        if c <= x:
            lo = mid
        else:
            hi = mid - 1
    return lo


def prox(x, double lam, const double[::1] knots, const double[::1] dl,
         const double[::1] dr, double al, double ar):
    """Proximal map at scale ``lam`` and its derivative, elementwise."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    cdef const double[::1] xv = arr.ravel()
    cdef Py_ssize_t m = xv.shape[0], n = knots.shape[0], i, idx, j
    out = np.empty(m, dtype=np.float64)
    jac = np.empty(m, dtype=np.float64)
    cdef double[::1] yv = out
    cdef double[::1] gv = jac
    cdef double xi, g, curv
    with nogil:
        for i in range(m):
            xi = xv[i]
            idx = _locate(xi, lam, knots, dl, dr, n)
            if idx < 0:
                g = 1.0 / (1.0 + lam * al)
                yv[i] = knots[0] + (xi - (knots[0] + lam * dl[0])) * g
                gv[i] = g
            elif (idx & 1) == 0:
                yv[i] = knots[idx >> 1]
                gv[i] = 0.0
            else:
                j = idx >> 1
                if j == n - 1:
                    curv = ar
                else:
                    curv = (dl[j + 1] - dr[j]) / (knots[j + 1] - knots[j])
                g = 1.0 / (1.0 + lam * curv)
                yv[i] = knots[j] + (xi - (knots[j] + lam * dr[j])) * g
                gv[i] = g
    return out.reshape(shape), jac.reshape(shape)


def evaluate(x, const double[::1] knots, const double[::1] values,
             const double[::1] dl, const double[::1] dr, double al, double ar):
    """Function value and derivative elementwise."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    cdef const double[::1] xv = arr.ravel()
    cdef Py_ssize_t m = xv.shape[0], n = knots.shape[0], i, lo, hi, mid
    val = np.empty(m, dtype=np.float64)
    der = np.empty(m, dtype=np.float64)
    cdef double[::1] vv = val
    cdef double[::1] dv = der
    cdef double xi, t, curv
    with nogil:
        for i in range(m):
            xi = xv[i]
            if xi < knots[0]:
                t = xi - knots[0]
                vv[i] = values[0] + dl[0] * t + 0.5 * al * t * t
                dv[i] = dl[0] + al * t
                continue
            if xi >= knots[n - 1]:
                t = xi - knots[n - 1]
                vv[i] = values[n - 1] + dr[n - 1] * t + 0.5 * ar * t * t
                if t == 0.0:
                    dv[i] = 0.5 * (dl[n - 1] + dr[n - 1])
                else:
                    dv[i] = dr[n - 1] + ar * t
                continue
            lo = 0
            hi = n - 1
            while hi - lo > 1:
                mid = (lo + hi) >> 1
                if knots[mid] <= xi:
                    lo = mid
                else:
                    hi = mid
            t = xi - knots[lo]
            curv = (dl[lo + 1] - dr[lo]) / (knots[lo + 1] - knots[lo])
            vv[i] = values[lo] + dr[lo] * t + 0.5 * curv * t * t
            if t == 0.0:
                dv[i] = 0.5 * (dl[lo] + dr[lo])
            else:
                dv[i] = dr[lo] + curv * t
    return val.reshape(shape), der.reshape(shape)
