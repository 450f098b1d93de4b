"""Cell geometry: convexity checks, edge data, bilinear map, Piola transform."""

import numpy as np
import pytest

from quadfem.errors import Degenerate, NonConvex
from quadfem.geometry import Quad, random_convex_quad, random_quad_pair, unit_square

SQ2 = np.sqrt(2.0)


def _random_quads(seed, count):
    rng = np.random.default_rng(seed)
    return [random_convex_quad(rng) for _ in range(count)]


# -- construction and validation ---------------------------------------------


def test_unit_square_metrics(square):
    assert square.h == pytest.approx(SQ2, abs=1e-15)
    assert square.area == pytest.approx(1.0, abs=1e-15)
    assert square.d == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(square.centroid, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(square.edges[0].normal, [-1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(square.edges[1].normal, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(square.edges[2].normal, [0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(square.edges[3].normal, [0.0, 1.0], atol=1e-15)


def test_unit_square_inscribed_diameter(square):
    # each corner subtriangle is right isosceles with legs 1: inradius
    # (1 + 1 - sqrt(2))/2, and rho is twice the smallest such inradius
    assert square.rho == pytest.approx(2.0 - SQ2, abs=1e-12)
    assert square.quality == pytest.approx(SQ2 - 1.0, abs=1e-12)


def test_rho_matches_grid_search_oracle(trapezoid):
    # independent check: maximize the inscribed-circle radius of each corner
    # subtriangle by brute-force search over barycentric coordinates
    v = trapezoid.vertices
    rho_ref = np.inf
    m = 120
    grid = [
        (a, b, 1.0 - a - b)
        for a in np.linspace(0.0, 1.0, m)
        for b in np.linspace(0.0, 1.0 - a, max(int((1.0 - a) * m), 1))
    ]
    bary = np.array(grid)
    for k in range(4):
        tri = np.array([v[k - 1], v[k], v[(k + 1) % 4]])
        centers = bary @ tri
        best = 0.0
        for j in range(3):
            a, b = tri[j], tri[(j + 1) % 3]
            t = b - a
            n = np.array([-t[1], t[0]]) / np.linalg.norm(t)
            dist = np.abs((centers - a) @ n)
            best = dist if j == 0 else np.minimum(best, dist)
        rho_ref = min(rho_ref, 2.0 * best.max())
    assert trapezoid.rho == pytest.approx(rho_ref, rel=2e-2)


def test_nonconvex_rejected():
    with pytest.raises(NonConvex):
        Quad([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (2.0, 2.0)])
    with pytest.raises(NonConvex):  # clockwise ordering
        Quad([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)])


def test_degenerate_rejected():
    with pytest.raises(Degenerate):
        Quad([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (0.0, 1.0)])  # collinear corner
    with pytest.raises(Degenerate):
        Quad([(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)])
    with pytest.raises(Degenerate):
        Quad([(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)])  # repeated vertex


def test_bad_shape_rejected(square):
    with pytest.raises(ValueError):
        Quad([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])
    with pytest.raises(ValueError):
        Quad([(0.0, 0.0), (np.nan, 0.0), (1.0, 1.0), (0.0, 1.0)])


# -- edge data -----------------------------------------------------------------


def test_edge_distance_examples(square, trapezoid):
    assert square.edge_distance(1, (0.3, 0.7)) == pytest.approx(0.3, abs=1e-15)
    assert square.edge_distance(2, (0.3, 0.7)) == pytest.approx(0.7, abs=1e-15)
    assert square.edge_distance(3, (0.3, 0.7)) == pytest.approx(0.7, abs=1e-15)
    assert square.edge_distance(4, (0.3, 0.7)) == pytest.approx(0.3, abs=1e-15)
    assert trapezoid.edge_distance(3, (1.0, 1.0)) == pytest.approx(1.0, abs=1e-14)


def test_edge_distance_vanishes_on_own_edge():
    t = np.linspace(-1.0, 1.0, 20)
    for quad in _random_quads(7, 10):
        for i in range(1, 5):
            x = quad.edges[i - 1].points(t)
            assert np.abs(quad.edge_distance(i, x)).max() <= 1e-13 * quad.h
        interior = quad.map.forward(np.random.default_rng(i).uniform(-0.9, 0.9, (30, 2)))
        for i in range(1, 5):
            assert (quad.edge_distance(i, interior) > 0.0).all()


def test_edge_tangent_orthonormal():
    for quad in _random_quads(11, 20):
        for e in quad.edges:
            assert abs(e.tangent @ e.normal) <= 1e-14
            assert np.linalg.norm(e.tangent) == pytest.approx(1.0, abs=1e-14)
            assert np.linalg.norm(e.normal) == pytest.approx(1.0, abs=1e-14)


def test_edge_points_affine(square):
    e2 = square.edges[1]  # right edge, v1 -> v2
    np.testing.assert_allclose(e2.points(np.array([-1.0]))[0], [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(e2.points(np.array([1.0]))[0], [1.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(e2.points(np.array([0.0]))[0], e2.midpoint, atol=1e-15)
    assert e2.length == pytest.approx(1.0, abs=1e-15)


def test_edges_parallel_flags(square, trapezoid):
    assert square.edges_parallel(1, 2) and square.edges_parallel(3, 4)
    assert not square.edges_parallel(1, 3)
    assert trapezoid.edges_parallel(3, 4)
    assert not trapezoid.edges_parallel(1, 2)


# -- bilinear map ---------------------------------------------------------------


def test_map_forward_unit_square(square):
    xhat = np.array([[0.0, 0.0], [-0.5, 0.5], [-1.0, -1.0], [1.0, 1.0]])
    x = square.map.forward(xhat)
    np.testing.assert_allclose(x, (xhat + 1.0) / 2.0, atol=1e-15)
    _, J = square.map.jacobian(xhat)
    np.testing.assert_allclose(J, 0.25, atol=1e-15)


def test_map_corners_to_vertices():
    corners = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    for quad in _random_quads(3, 20):
        np.testing.assert_allclose(quad.map.forward(corners), quad.vertices, atol=1e-14)


def test_map_inverse_values(square):
    xhat = square.map.inverse(np.array([[0.25, 0.75], [1.0, 1.0]]))
    np.testing.assert_allclose(xhat[0], [-0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(xhat[1], [1.0, 1.0], atol=1e-11)


def test_map_roundtrip_random_quads():
    rng = np.random.default_rng(5)
    for quad in _random_quads(17, 100):
        xhat = rng.uniform(-1.0, 1.0, (100, 2))
        x = quad.map.forward(xhat)
        back = quad.map.inverse(x)
        assert np.abs(back - xhat).max() <= 1e-11


def test_jacobian_positive_inside():
    xhat = np.random.default_rng(2).uniform(-1.0, 1.0, (200, 2))
    for quad in _random_quads(23, 20):
        _, J = quad.map.jacobian(xhat)
        assert (J > 0.0).all()


# -- Piola transform -------------------------------------------------------------


def test_piola_unit_square(square):
    xhat = np.array([[0.2, -0.3]])
    v = square.map.piola(xhat, np.array([[1.0, 0.0]]))
    np.testing.assert_allclose(v[0], [2.0, 0.0], atol=1e-14)
    v = square.map.piola(xhat, np.array([[0.0, 0.0]]))
    np.testing.assert_allclose(v[0], [0.0, 0.0], atol=1e-15)


REF_NORMALS = {1: (-1.0, 0.0), 2: (1.0, 0.0), 3: (0.0, -1.0), 4: (0.0, 1.0)}


def _ref_edge_points(i, t):
    fixed = {1: -1.0, 2: 1.0, 3: -1.0, 4: 1.0}[i]
    if i in (1, 2):
        return np.column_stack([np.full_like(t, fixed), t])
    return np.column_stack([t, np.full_like(t, fixed)])


def test_piola_preserves_edge_fluxes():
    from quadfem.quadrature import edge_rule, gauss_1d

    rng = np.random.default_rng(31)
    t, w = gauss_1d(12)
    for quad in _random_quads(41, 20):
        coef = rng.uniform(-1.0, 1.0, (2, 3, 3))

        def vhat(xh):
            powers1 = xh[:, 0][:, None] ** np.arange(3)
            powers2 = xh[:, 1][:, None] ** np.arange(3)
            return np.stack(
                [np.einsum("na,ab,nb->n", powers1, coef[k], powers2) for k in (0, 1)],
                axis=1,
            )

        for i in range(1, 5):
            xhat = _ref_edge_points(i, t)
            ref_flux = (vhat(xhat) @ REF_NORMALS[i]) @ w
            _, wp, tp = edge_rule(quad, i, 12)
            xh_phys = _ref_edge_points(i, tp)
            v = quad.map.piola(xh_phys, vhat(xh_phys))
            phys_flux = (v @ quad.edges[i - 1].normal) @ wp
            scale = max(abs(ref_flux), 1.0)
            assert abs(phys_flux - ref_flux) <= 1e-10 * scale


# -- random generators ------------------------------------------------------------


def test_random_convex_quad_properties():
    rng = np.random.default_rng(9)
    quads = [random_convex_quad(rng) for _ in range(50)]
    for quad in quads:
        assert quad.quality >= 0.12
        assert 0.0 < quad.rho <= quad.h
    again = [random_convex_quad(np.random.default_rng(9)) for _ in range(1)]
    np.testing.assert_array_equal(again[0].vertices, quads[0].vertices)


def test_random_quad_pair_shares_edge():
    rng = np.random.default_rng(13)
    for _ in range(20):
        left, right = random_quad_pair(rng)
        le, re = left.edges[1], right.edges[0]
        np.testing.assert_allclose(le.a, re.a, atol=1e-15)
        np.testing.assert_allclose(le.b, re.b, atol=1e-15)
        np.testing.assert_allclose(le.normal, -re.normal, atol=1e-14)
