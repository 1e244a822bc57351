import os
import runpy

import numpy as np
import pytest

from hidim import _kernels_py, kernels
from hidim.convex import TabulatedConvexFunction

compiled = pytest.importorskip("hidim._kernels")


def random_function(rng, n):
    knots = np.sort(rng.uniform(-5, 5, n))
    knots = np.unique(knots)
    slopes = np.sort(rng.normal(0, 2, 2 * knots.size))
    dl, dr = slopes[0::2], slopes[1::2]
    # make a few knots smooth
    smooth = rng.random(knots.size) < 0.5
    dr = np.where(smooth, dl, dr)
    values = np.empty(knots.size)
    values[0] = 0.0
    values[1:] = np.cumsum(0.5 * np.diff(knots) * (dr[:-1] + dl[1:]))
    return TabulatedConvexFunction(knots, values, dl, dr, (0.3, 0.7))


def test_backend_selected():
    assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("n", [1, 2, 7, 200])
def test_prox_parity(rng, n):
    f = random_function(rng, n)
    x = rng.normal(0, 6, 5000)
    for lam in (1e-3, 0.5, 3.0):
        args = (f.knots, f.left_slopes, f.right_slopes, *f.tail_curvature)
        y1, j1 = _kernels_py.prox(x, lam, *args)
        y2, j2 = compiled.prox(x, lam, *args)
        np.testing.assert_allclose(y1, y2, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(j1, j2)


@pytest.mark.parametrize("n", [1, 3, 200])
def test_evaluate_parity(rng, n):
    f = random_function(rng, n)
    x = np.concatenate([rng.normal(0, 6, 3000), f.knots])
    args = (f.knots, f.values, f.left_slopes, f.right_slopes, *f.tail_curvature)
    v1, d1 = _kernels_py.evaluate(x, *args)
    v2, d2 = compiled.evaluate(x, *args)
    np.testing.assert_allclose(v1, v2, rtol=1e-13, atol=1e-12)
    np.testing.assert_allclose(d1, d2, rtol=1e-13, atol=1e-12)


def test_prox_is_the_minimiser(rng):
    f = random_function(rng, 30)
    grid = np.linspace(-40, 40, 800001)
    fg = f.value(grid)
    for x in rng.normal(0, 6, 20):
        lam = 0.7
        brute = grid[np.argmin((grid - x) ** 2 / (2 * lam) + fg)]
        assert abs(f.prox(lam, x) - brute) < 2e-4


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_benchmark_script_runs(capsys):
    path = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    bench = runpy.run_path(path)
    assert bench["main"](["--sizes", "200", "--repeat", "1"]) == 0
    assert "prox" in capsys.readouterr().out
