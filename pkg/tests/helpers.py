"""Shared builders for tests."""

import numpy as np

from hidim.convex import TabulatedConvexFunction


def random_convex(seed, n=None):
    """Random piecewise-quadratic convex function with kinks and smooth knots."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 40)) if n is None else n
    knots = np.unique(np.sort(rng.uniform(-4, 4, n)))
    slopes = np.sort(rng.normal(0, 2, 2 * knots.size))
    dl, dr = slopes[0::2], slopes[1::2]
    dr = np.where(rng.random(knots.size) < 0.5, dl, dr)
    values = np.zeros(knots.size)
    values[1:] = np.cumsum(0.5 * np.diff(knots) * (dr[:-1] + dl[1:]))
    tails = tuple(rng.uniform(0, 2, 2))
    return TabulatedConvexFunction(knots, values, dl, dr, tails)


def even_fit_ratio(x, f):
    """|c4 / c2| of the least-squares fit ``c0 + c2 x^2 + c4 x^4``."""
    A = np.column_stack([np.ones_like(x), x ** 2, x ** 4])
    c = np.linalg.lstsq(A, f, rcond=None)[0]
    return abs(c[2] / c[1])


#: Criterion number -> :class:`Criterion`, filled by the acceptance suite.
ACCEPTANCE = {}


class Criterion:
    """Sub-check collector for one acceptance criterion."""

    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.checks = []
        ACCEPTANCE[number] = self

    @classmethod
    def get(cls, number, title=""):
        return ACCEPTANCE.get(number) or cls(number, title)

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    @property
    def passed(self):
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def finish(self, expected_failures=()):
        """Assert every sub-check passed, except those listed (checked elsewhere)."""
        bad = [(n, d) for n, ok, d in self.checks if not ok and n not in expected_failures]
        assert not bad, f"criterion {self.number}: {bad}"

    def lines(self):
        status = "PASS" if self.passed else "FAIL"
        out = [f"criterion {self.number:2d} {status}: {self.title}"]
        for name, ok, detail in self.checks:
            if not ok:
                out.append(f"    failed sub-check {name}: {detail}")
        return out
