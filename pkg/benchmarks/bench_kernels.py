"""Compare the compiled and numpy kernels for prox and evaluation.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 1000 100000] [--repeat 20]

Both backends are imported directly, so the environment variable that selects
the backend at import does not matter here. Outputs agree to roundoff; the
script checks this before timing.
"""

import argparse
import timeit

import numpy as np

from hidim import _kernels_py
from hidim.distributions import ScalarDistribution
from hidim.optimal import optimal_loss

try:
    from hidim import _kernels as compiled
except ImportError:  # pragma: no cover - depends on the build
    compiled = None


def optimal_loss_args():
    # a typical constructed function: the optimal loss for Laplacian noise
    f = optimal_loss(ScalarDistribution.laplacian(1.0), 1.0)
    return f.knots, f.values, f.left_slopes, f.right_slopes, *f.tail_curvature


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[1000, 100_000, 1_000_000])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; nothing to compare")
        return 1
    knots, values, dl, dr, al, ar = optimal_loss_args()
    rng = np.random.default_rng(0)
    print(f"function with {knots.size} knots")
    lam = 0.7
    print(f"{'kernel':<10}{'n':>10}{'numpy [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for n in args.sizes:
        x = rng.normal(0.0, 3.0, n)
        cases = {
            "prox": (lambda: _kernels_py.prox(x, lam, knots, dl, dr, al, ar),
                     lambda: compiled.prox(x, lam, knots, dl, dr, al, ar)),
            "evaluate": (lambda: _kernels_py.evaluate(x, knots, values, dl, dr, al, ar),
                         lambda: compiled.evaluate(x, knots, values, dl, dr, al, ar)),
        }
        for name, (py, cy) in cases.items():
            for a, b in zip(py(), cy()):
                np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
            t_py = bench(py, args.repeat) * 1e3
            t_cy = bench(cy, args.repeat) * 1e3
            print(f"{name:<10}{n:>10}{t_py:>14.3f}{t_cy:>16.3f}{t_py / t_cy:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
