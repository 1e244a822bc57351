"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``HIDIM_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("HIDIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        _compiled = None

if _compiled is None:
    BACKEND = "python"
    prox = _kernels_py.prox
    evaluate = _kernels_py.evaluate
else:
    BACKEND = "cython"

    # the compiled kernels work on flat arrays; restore the input shape
    def prox(x, lam, knots, dl, dr, al, ar):
        x = np.asarray(x, dtype=float)
        y, jac = _compiled.prox(np.ascontiguousarray(x.ravel()), lam, knots, dl, dr, al, ar)
        return np.reshape(y, x.shape), np.reshape(jac, x.shape)

    def evaluate(x, knots, values, dl, dr, al, ar):
        x = np.asarray(x, dtype=float)
        v, d = _compiled.evaluate(np.ascontiguousarray(x.ravel()), knots, values, dl, dr, al, ar)
        return np.reshape(v, x.shape), np.reshape(d, x.shape)
