"""Geometry of a single convex quadrilateral.

Everything an element needs from its cell lives here: edge data (midpoints,
unit outward normals, tangents), the edge distance functions, the bilinear
map from the reference square [-1,1]^2 with its Piola transform, and the
shape-regularity metrics h_E (diameter) and rho_E (twice the smallest
inscribed-circle radius of the four corner subtriangles).

Vertices are supplied counterclockwise starting at the bottom-left corner
under the reference-square correspondence.  Edge numbering:

    e1 = left, e2 = right, e3 = bottom, e4 = top

so that the bilinear map sends {xhat1 = -1} to e1, {xhat1 = +1} to e2,
{xhat2 = -1} to e3 and {xhat2 = +1} to e4.
"""

from __future__ import annotations

import numpy as np

from .errors import Degenerate, NoConvergence, NonConvex

# Relative tolerance for the strict-convexity test (scaled by h_E^2).
CONVEXITY_RTOL = 1e-12
# Two edges count as parallel when |nu_i x nu_j| is below this.
PARALLEL_TOL = 1e-12


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class Edge:
    """One edge of a quad: endpoints, midpoint, outward normal, tangent."""

    __slots__ = ("a", "b", "midpoint", "normal", "tangent", "length")

    def __init__(self, a, b, normal):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.midpoint = 0.5 * (self.a + self.b)
        self.length = float(np.linalg.norm(self.b - self.a))
        self.normal = np.asarray(normal, dtype=float)
        # tangent is the 90-degree counterclockwise rotation of the normal
        self.tangent = np.array([-self.normal[1], self.normal[0]])

    def points(self, t):
        """Map parameters t in [-1,1] affinely onto the edge (a at -1)."""
        t = np.asarray(t, dtype=float)
        return self.midpoint + 0.5 * np.outer(t, self.b - self.a)


class BilinearMap:
    """The bilinear bijection F from [-1,1]^2 onto a convex quadrilateral.

    F(xhat) = a + b xhat1 + c xhat2 + d xhat1 xhat2, with the corner
    correspondence F(-1,-1) = v0, F(1,-1) = v1, F(1,1) = v2, F(-1,1) = v3.
    """

    __slots__ = ("a", "b", "c", "d", "_h")

    def __init__(self, vertices):
        v0, v1, v2, v3 = (np.asarray(v, dtype=float) for v in vertices)
        self.a = 0.25 * (v0 + v1 + v2 + v3)
        self.b = 0.25 * (-v0 + v1 + v2 - v3)
        self.c = 0.25 * (-v0 - v1 + v2 + v3)
        self.d = 0.25 * (v0 - v1 + v2 - v3)
        diffs = [v1 - v0, v2 - v0, v3 - v0, v2 - v1, v3 - v1, v3 - v2]
        self._h = max(float(np.linalg.norm(t)) for t in diffs)

    def forward(self, xhat):
        """Evaluate F at one point (2,) or many points (n,2)."""
        xh = np.asarray(xhat, dtype=float)
        s1 = xh[..., 0:1]
        s2 = xh[..., 1:2]
        return self.a + self.b * s1 + self.c * s2 + self.d * (s1 * s2)

    def jacobian(self, xhat):
        """Return (DF, J) at one or many reference points.

        DF has shape (..., 2, 2) with DF[..., :, k] = dF/dxhat_k and
        J = det DF, positive on [-1,1]^2 for convex input.
        """
        xh = np.asarray(xhat, dtype=float)
        s1 = xh[..., 0]
        s2 = xh[..., 1]
        col1 = self.b + np.multiply.outer(s2, self.d)
        col2 = self.c + np.multiply.outer(s1, self.d)
        DF = np.stack([col1, col2], axis=-1)
        J = col1[..., 0] * col2[..., 1] - col1[..., 1] * col2[..., 0]
        return DF, J

    def inverse(self, x, tol=None, maxiter=50):
        """Invert the map by damped Newton iteration started at the center.

        Accepts one point (2,) or many (n,2).  Raises NoConvergence when a
        point fails to meet ``tol`` (default 1e-13 * h_E) within ``maxiter``
        iterations, which signals a point outside E or a degenerate map.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x.reshape(-1, 2)
        if tol is None:
            tol = 1e-13 * self._h
        xhat = np.zeros_like(pts)
        res = self.forward(xhat) - pts
        for _ in range(maxiter):
            norms = np.linalg.norm(res, axis=1)
            active = norms > tol
            if not active.any():
                break
            DF, J = self.jacobian(xhat[active])
            r = res[active]
            # solve DF * delta = r per point (2x2 Cramer)
            delta = np.empty_like(r)
            delta[:, 0] = (DF[:, 1, 1] * r[:, 0] - DF[:, 0, 1] * r[:, 1]) / J
            delta[:, 1] = (-DF[:, 1, 0] * r[:, 0] + DF[:, 0, 0] * r[:, 1]) / J
            step = np.ones(len(r))
            trial = xhat[active] - delta
            new_res = self.forward(trial) - pts[active]
            # damp individually until the residual actually decreases
            for _ in range(30):
                worse = np.linalg.norm(new_res, axis=1) > norms[active]
                if not worse.any():
                    break
                step[worse] *= 0.5
                trial[worse] = xhat[active][worse] - step[worse, None] * delta[worse]
                new_res[worse] = self.forward(trial[worse]) - pts[active][worse]
            xhat[active] = trial
            res[active] = new_res
        if (np.linalg.norm(res, axis=1) > tol).any():
            raise NoConvergence(
                "bilinear map inversion did not converge "
                "(point outside the element or degenerate map)",
                best=xhat[0] if single else xhat,
            )
        return xhat[0] if single else xhat

    def piola(self, xhat, vhat):
        """Contravariant (Piola) transform (1/J) DF vhat at xhat.

        Vectorized over matching leading dimensions of xhat and vhat.
        Preserves edge normal fluxes, which is what H(div) conformity needs.
        """
        DF, J = self.jacobian(xhat)
        vh = np.asarray(vhat, dtype=float)
        v = np.einsum("...ij,...j->...i", DF, vh)
        return v / np.asarray(J)[..., None]


class Quad:
    """A strictly convex quadrilateral with its per-element geometry.

    Parameters
    ----------
    vertices : array_like, shape (4, 2)
        Corner coordinates in counterclockwise order starting at the
        bottom-left corner of the reference correspondence.

    Raises
    ------
    NonConvex
        If some corner subtriangle has negative signed area.
    Degenerate
        If vertices coincide or a corner is (numerically) collinear.
    """

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.shape != (4, 2):
            raise ValueError("expected four 2-D vertices")
        if not np.isfinite(v).all():
            raise ValueError("vertices must be finite")
        self.vertices = v

        diffs = v[[1, 2, 3, 2, 3, 3]] - v[[0, 0, 0, 1, 1, 2]]
        self.h = float(np.max(np.linalg.norm(diffs, axis=1)))
        if self.h == 0.0:
            raise Degenerate("all vertices coincide")

        # signed areas of the four corner subtriangles (prev, this, next)
        tri_areas = np.empty(4)
        for k in range(4):
            p, q, r = v[k - 1], v[k], v[(k + 1) % 4]
            tri_areas[k] = 0.5 * _cross2(q - p, r - q)
        tol = CONVEXITY_RTOL * self.h**2
        if (tri_areas < -tol).any():
            raise NonConvex("vertices are not in convex counterclockwise position")
        if (tri_areas <= tol).any():
            raise Degenerate("quadrilateral collapses to a triangle or segment")
        self._tri_areas = tri_areas

        self.area = float(tri_areas[0] + tri_areas[2])  # split along one diagonal
        self.d = float(np.sqrt(self.area))
        # polygon centroid (area-weighted, shoelace form)
        cx = cy = 0.0
        for k in range(4):
            x0, y0 = v[k]
            x1, y1 = v[(k + 1) % 4]
            w = x0 * y1 - x1 * y0
            cx += (x0 + x1) * w
            cy += (y0 + y1) * w
        self.centroid = np.array([cx, cy]) / (6.0 * self.area)

        # rho_E: twice the smallest inradius among the corner subtriangles
        rho = np.inf
        for k in range(4):
            p, q, r = v[k - 1], v[k], v[(k + 1) % 4]
            a = np.linalg.norm(q - p)
            b = np.linalg.norm(r - q)
            c = np.linalg.norm(r - p)
            rho = min(rho, 2.0 * 2.0 * tri_areas[k] / (a + b + c))
        self.rho = float(rho)

        # edges in the fixed local numbering; CCW boundary direction is
        # e3: v0->v1, e2: v1->v2, e4: v2->v3 reversed, e1: v3->v0 reversed.
        def outward(a, b):
            t = b - a
            n = np.array([t[1], -t[0]])  # right of CCW traversal = outward
            return n / np.linalg.norm(n)

        self.edges = [
            Edge(v[0], v[3], outward(v[3], v[0])),  # e1 left   (v3 -> v0 CCW)
            Edge(v[1], v[2], outward(v[1], v[2])),  # e2 right  (v1 -> v2 CCW)
            Edge(v[0], v[1], outward(v[0], v[1])),  # e3 bottom (v0 -> v1 CCW)
            Edge(v[3], v[2], outward(v[2], v[3])),  # e4 top    (v2 -> v3 CCW)
        ]
        self.map = BilinearMap(v)

    # -- edge distance functions --------------------------------------

    def edge_distance(self, i, x):
        """lambda_i(x) = -(x - x_i) . nu_i for edge i in {1,2,3,4}.

        Positive inside the element, zero on edge e_i.  ``x`` may be a
        single point (2,) or an array of points (n, 2).
        """
        e = self.edges[i - 1]
        x = np.asarray(x, dtype=float)
        return -((x - e.midpoint) @ e.normal)

    def edges_parallel(self, i, j):
        """True when edges i and j are parallel (|nu_i x nu_j| <= tol)."""
        ni = self.edges[i - 1].normal
        nj = self.edges[j - 1].normal
        return abs(_cross2(ni, nj)) <= PARALLEL_TOL

    @property
    def quality(self):
        """Shape-regularity ratio rho_E / h_E in (0, 1]."""
        return self.rho / self.h


def unit_square():
    return Quad([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


_SQUARE = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


def random_convex_quad(rng, jitter=0.3, min_quality=0.12):
    """Random strictly convex quadrilateral from a seeded generator.

    Perturbs the unit-square corners by uniform offsets up to ``jitter``
    and redraws until the result is convex, non-degenerate, and has
    shape-regularity ratio at least ``min_quality``.
    """
    while True:
        v = _SQUARE + rng.uniform(-jitter, jitter, size=(4, 2))
        try:
            quad = Quad(v)
        except (NonConvex, Degenerate):
            continue
        if quad.quality >= min_quality:
            return quad


def random_quad_pair(rng, jitter=0.25, min_quality=0.12):
    """Two random convex quads sharing an edge (left e2 equals right e1).

    Returns (left, right); the shared edge runs a -> b in the same
    direction in both elements' local edge parametrizations.
    """
    base = np.array(
        [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (0.0, 1.0)]
    )
    while True:
        p = base + rng.uniform(-jitter, jitter, size=(6, 2))
        try:
            left = Quad([p[0], p[1], p[4], p[5]])
            right = Quad([p[1], p[2], p[3], p[4]])
        except (NonConvex, Degenerate):
            continue
        if left.quality >= min_quality and right.quality >= min_quality:
            return left, right
