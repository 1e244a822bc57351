"""Composite Gauss-Legendre quadrature on panel grids.

Every one-dimensional expectation in the package goes through
:class:`PanelRule`. Panels are delimited by a uniform grid over a symmetric
window, refined around known non-smooth points, so kinks of densities and of
proximal maps always fall on panel boundaries.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

#: Number of panel edges of the default grid.
DEFAULT_POINTS = 4001
#: Gauss-Legendre nodes per panel.
DEFAULT_ORDER = 4


@lru_cache(maxsize=16)
def _reference_rule(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(edges, order=DEFAULT_ORDER):
    """Nodes and weights of the composite rule on sorted ``edges``."""
    edges = np.asarray(edges, dtype=float)
    xi, wi = _reference_rule(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    weights = (half[:, None] * wi[None, :]).ravel()
    return nodes, weights


def build_edges(lo, hi, n_points=DEFAULT_POINTS, features=(), feature_width=0.0,
                breakpoints=(), feature_points=401):
    """Panel edges over ``[lo, hi]``.

    Parameters
    ----------
    lo, hi : float
        Integration window.
    n_points : int
        Number of uniformly spaced edges.
    features : sequence of float
        Non-smooth points of the integrand family (e.g. the Laplacian kink).
        They always become edges.
    feature_width : float
        If positive and narrower than 20 main-grid spacings, a second uniform
        grid of ``feature_points`` edges of half-width ``10 * feature_width``
        is laid around each feature. Used when a density is smooth but varies
        on a scale much finer than the main grid (a kink blurred by a small
        Gaussian).
    breakpoints : sequence of float
        Additional edges (kinks of a proximal map, for instance).
    """
    parts = [np.linspace(lo, hi, n_points)]
    spacing = (hi - lo) / (n_points - 1)
    for f in features:
        if not lo < f < hi:
            continue
        parts.append([f])
        if 0.0 < feature_width < 20.0 * spacing:
            w = 10.0 * feature_width
            parts.append(np.linspace(max(f - w, lo), min(f + w, hi), feature_points))
    bp = np.asarray(breakpoints, dtype=float).ravel()
    if bp.size:
        parts.append(bp[(bp > lo) & (bp < hi)])
    edges = np.unique(np.concatenate([np.asarray(p, dtype=float) for p in parts]))
    # Edges closer than a few ulps would produce empty panels.
    keep = np.concatenate([[True], np.diff(edges) > 1e-13 * max(1.0, hi - lo)])
    edges = edges[keep]
    edges[-1] = hi
    return edges


def refine_edges(edges):
    """Bisect every panel."""
    mids = 0.5 * (edges[1:] + edges[:-1])
    return np.sort(np.concatenate([edges, mids]))


class PanelRule:
    """A composite Gauss-Legendre rule on fixed edges."""

    def __init__(self, edges, order=DEFAULT_ORDER):
        self.edges = np.asarray(edges, dtype=float)
        self.order = order
        self.nodes, self.weights = panel_nodes(self.edges, order)

    def integrate(self, values):
        """Integrate tabulated ``values`` (last axis over the nodes)."""
        return np.asarray(values) @ self.weights

    def refined(self):
        return PanelRule(refine_edges(self.edges), self.order)

    def __len__(self):
        return self.nodes.size
