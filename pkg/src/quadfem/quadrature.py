"""Gauss-Legendre quadrature on segments, the reference square, and cells.

Physical-cell rules push the tensor rule through the bilinear map, weighting
by the Jacobian determinant; edge rules map the 1-D rule affinely onto the
edge.  No rule is exact for the rational supplement functions, so the
default orders (assembly r+3, norms and rational integrands r+5) are chosen
to keep quadrature error well below discretization error, and the tests
check self-consistency between increasing orders.
"""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedOrder

MAX_POINTS = 30

_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_1d(k):
    """Nodes and weights of the k-point Gauss-Legendre rule on [-1, 1].

    Exact for polynomials of degree <= 2k-1.  1 <= k <= 30.
    """
    if not 1 <= int(k) == k:
        raise UnsupportedOrder(f"point count must be a positive integer, got {k!r}")
    if k > MAX_POINTS:
        raise UnsupportedOrder(f"point count {k} exceeds supported maximum {MAX_POINTS}")
    k = int(k)
    if k not in _cache:
        x, w = np.polynomial.legendre.leggauss(k)
        _cache[k] = (x, w)
    return _cache[k]


def tensor_rule(k):
    """Tensor-product rule on the reference square [-1,1]^2.

    Returns (points, weights) with points of shape (k*k, 2); integrates
    bivariate polynomials of degree <= 2k-1 per axis exactly.
    """
    x, w = gauss_1d(k)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    wts = np.outer(w, w).ravel()
    return pts, wts


def cell_rule(quad, k):
    """Quadrature rule on a physical cell.

    Returns (x, w, xhat): physical points (k*k, 2), weights including the
    Jacobian determinant so that sum(f(x) * w) approximates the integral
    over E, and the generating reference points (handy for mapped fields).
    """
    ref_pts, ref_wts = tensor_rule(k)
    x = quad.map.forward(ref_pts)
    _, J = quad.map.jacobian(ref_pts)
    return x, ref_wts * J, ref_pts


def integrate_cell(quad, f, k):
    """Integrate a scalar (or componentwise vector) field over a cell.

    ``f`` is called with an (n, 2) array of physical points and must return
    (n,) or (n, m) values.
    """
    x, w, _ = cell_rule(quad, k)
    vals = np.asarray(f(x))
    return vals.T @ w if vals.ndim > 1 else float(vals @ w)


def edge_rule(quad, i, k):
    """Quadrature rule on edge e_i of a cell.

    Returns (x, w, t): physical points (k, 2) on the edge, weights summing
    to the edge length, and the parameters t in [-1, 1].
    """
    t, w = gauss_1d(k)
    e = quad.edges[i - 1]
    return e.points(t), w * (e.length / 2.0), t


def integrate_edge(quad, i, g, k):
    """Integrate a field along edge e_i; ``g`` takes (n, 2) physical points."""
    x, w, _ = edge_rule(quad, i, k)
    vals = np.asarray(g(x))
    return vals.T @ w if vals.ndim > 1 else float(vals @ w)
