"""Vector elements: span layout, DoF duality, projection, exact sequence."""

import numpy as np
import pytest

from quadfem.analysis import (
    commuting_residual,
    derham_inclusion_residual,
    div_exactness_residual,
    gradient_curl_identity_residual,
    mixed_unisolvence_residual,
    trace_degree_residual,
)
from quadfem.errors import UnsupportedOrder
from quadfem.geometry import random_convex_quad, unit_square
from quadfem.mixed import (
    MixedElement,
    build_mixed_element,
    edge_reference_coords,
    eval_vector_basis,
    project_mixed,
    project_scalar,
    scalar_monomials,
)
from quadfem.quadrature import gauss_1d
from quadfem.serendipity import DSElement, SupplementChoice

CHOICES = [
    SupplementChoice.simple(),
    SupplementChoice.geometric(),
    SupplementChoice.lemma(),
    SupplementChoice.mapped(),
]


def _num_curls(r):
    return (r + 2) * (r + 3) // 2 - 1


def _expected_dim(r, variant):
    s = r if variant == "full" else r - 1
    return 4 * (r + 1) + ((s + 1) * (s + 2) // 2 - 1) + max((r - 2) * (r - 1) // 2, 0)


# -- dimensions and span layout ---------------------------------------------------


def test_dimension_examples(square):
    assert MixedElement(square, 1, "reduced").dim == 8
    assert MixedElement(square, 1, "full").dim == 10
    assert MixedElement(square, 2, "reduced").dim == 14
    assert MixedElement(square, 2, "full").dim == 17
    assert MixedElement(square, 3, "reduced").dim == 22


@pytest.mark.parametrize("variant", ["reduced", "full"])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_dimension_formula(square, r, variant):
    el = MixedElement(square, r, variant)
    assert el.dim == _expected_dim(r, variant)
    assert el.dim == r * r + 3 * r + 4 + (r + 1 if variant == "full" else 0)
    assert el.num_edge_dofs() == 4 * (r + 1)
    assert len(el.w_basis) == (el.s + 1) * (el.s + 2) // 2


def test_lowest_reduced_element_has_no_interior_dofs(square):
    el = MixedElement(square, 1, "reduced")
    assert el.dim == el.num_edge_dofs()


def test_unsupported_order_and_variant(square):
    with pytest.raises(UnsupportedOrder):
        MixedElement(square, 0)
    with pytest.raises(ValueError):
        MixedElement(square, 1, "banana")


def test_curl_members_divergence_free():
    rng = np.random.default_rng(51)
    quad = random_convex_quad(rng)
    x = quad.map.forward(rng.uniform(-1.0, 1.0, (20, 2)))
    for r, variant in ((1, "reduced"), (2, "full")):
        el = MixedElement(quad, r, variant)
        for fn in el.span[: _num_curls(r)]:
            assert np.abs(fn.div(x)).max() <= 1e-11


def test_xtype_divergence_spans_linears(square):
    # the linear x-type member x (x1 - c1)/d has divergence 3 (x1 - c1)/d^2
    el = MixedElement(square, 1, "full")
    fn = el.span[_num_curls(1) + 1]
    x = np.random.default_rng(3).uniform(0.0, 1.0, (15, 2))
    u1 = (x[:, 0] - square.centroid[0]) / square.d
    np.testing.assert_allclose(fn.div(x), 3.0 * u1 / square.d, atol=1e-13)
    vals = fn.val(x)
    np.testing.assert_allclose(vals[:, 0], (x[:, 0] - square.centroid[0]) * u1 / square.d, atol=1e-13)


@pytest.mark.parametrize("choice", CHOICES, ids=lambda c: c.variant)
def test_supplement_flux_pattern(choice):
    # sigma_1 carries flux only through the vertical pair e1, e2 and
    # sigma_2 only through the horizontal pair e3, e4
    rng = np.random.default_rng(57)
    t = gauss_1d(5)[0]
    for r in (1, 2, 3):
        quad = random_convex_quad(rng)
        el = MixedElement(quad, r, "reduced", choice)
        sigma1, sigma2 = el.span[-2], el.span[-1]
        for fn, zero_edges in ((sigma1, (3, 4)), (sigma2, (1, 2))):
            for i in zero_edges:
                x = quad.edges[i - 1].points(t)
                xhat = edge_reference_coords(i, t)
                flux = fn.val(x, xhat) @ quad.edges[i - 1].normal
                assert np.abs(flux).max() <= 1e-10


# -- unisolvence and DoF duality ----------------------------------------------------


@pytest.mark.parametrize("variant", ["reduced", "full"])
@pytest.mark.parametrize("choice", CHOICES, ids=lambda c: c.variant)
def test_dof_matrix_inverts(choice, variant):
    rng = np.random.default_rng(61)
    for r in (1, 2, 3):
        quad = random_convex_quad(rng)
        el = MixedElement(quad, r, variant, choice)
        assert mixed_unisolvence_residual(el) <= 1e-9


def test_projection_reproduces_vector_polynomials():
    rng = np.random.default_rng(67)
    for r, variant in ((1, "reduced"), (1, "full"), (2, "reduced"), (2, "full")):
        quad = random_convex_quad(rng)
        el = MixedElement(quad, r, variant)
        coef = rng.uniform(-1.0, 1.0, (2, r + 1, r + 1))
        a, b = np.indices(coef.shape[1:])
        coef[:, a + b > r] = 0.0

        def v(x):
            p1 = x[:, 0][:, None] ** np.arange(r + 1)
            p2 = x[:, 1][:, None] ** np.arange(r + 1)
            return np.stack(
                [np.einsum("na,ab,nb->n", p1, coef[k], p2) for k in (0, 1)], axis=1
            )

        c = project_mixed(el, v)
        xhat = rng.uniform(-1.0, 1.0, (30, 2))
        x = quad.map.forward(xhat)
        vals = np.einsum("i,ink->nk", c, el.eval_basis(x, xhat))
        scale = max(np.abs(v(x)).max(), 1.0)
        assert np.abs(vals - v(x)).max() <= 1e-9 * scale


def test_projection_of_zero_is_zero(square):
    el = MixedElement(square, 2, "full")
    c = project_mixed(el, lambda x: np.zeros((len(x), 2)))
    assert np.abs(c).max() <= 1e-14


def test_eval_vector_basis_shapes(square):
    el = build_mixed_element(square, 1, "reduced")
    x = np.array([[0.3, 0.4], [0.6, 0.2], [0.5, 0.9]])
    vals, divs = eval_vector_basis(el, x)
    assert vals.shape == (8, 3, 2)
    assert divs.shape == (8, 3)


# -- polynomial structure of traces and divergences ----------------------------------


@pytest.mark.parametrize("choice", CHOICES, ids=lambda c: c.variant)
def test_normal_trace_degree(choice):
    rng = np.random.default_rng(71)
    for r in (1, 2, 3):
        quad = random_convex_quad(rng)
        for variant in ("reduced", "full"):
            el = MixedElement(quad, r, variant, choice)
            assert trace_degree_residual(el) <= 1e-9


@pytest.mark.parametrize("variant", ["reduced", "full"])
def test_divergence_maps_onto_scalar_space(variant):
    rng = np.random.default_rng(73)
    for r in (1, 2, 3):
        quad = random_convex_quad(rng)
        el = MixedElement(quad, r, variant)
        assert div_exactness_residual(el) <= 1e-9


def test_interior_basis_functions_have_no_flux():
    rng = np.random.default_rng(79)
    t = gauss_1d(10)[0]
    for r, variant in ((2, "reduced"), (2, "full"), (3, "reduced")):
        quad = random_convex_quad(rng)
        el = MixedElement(quad, r, variant)
        for i in range(1, 5):
            x = quad.edges[i - 1].points(t)
            xhat = edge_reference_coords(i, t)
            vals = el.eval_basis(x, xhat)[el.num_edge_dofs():]
            flux = vals @ quad.edges[i - 1].normal
            assert np.abs(flux).max() <= 1e-9


# -- exact-sequence properties -------------------------------------------------------


@pytest.mark.parametrize("choice", CHOICES, ids=lambda c: c.variant)
def test_scalar_curls_lie_in_vector_space(choice):
    rng = np.random.default_rng(83)
    for r in (1, 2):
        quad = random_convex_quad(rng)
        ds = DSElement(quad, r + 1, choice)
        for variant in ("reduced", "full"):
            v_el = MixedElement(quad, r, variant, choice)
            assert derham_inclusion_residual(ds, v_el) <= 1e-9


def test_tangential_gradient_equals_curl_flux():
    rng = np.random.default_rng(89)
    for r in (1, 2):
        quad = random_convex_quad(rng)
        ds = DSElement(quad, r + 1, SupplementChoice.simple())
        assert gradient_curl_identity_residual(ds) <= 1e-9


@pytest.mark.parametrize("variant", ["reduced", "full"])
def test_commuting_projection_default_field(variant):
    rng = np.random.default_rng(97)
    for r in (1, 2):
        quad = random_convex_quad(rng)
        el = MixedElement(quad, r, variant)
        assert commuting_residual(el) <= 1e-9


def test_commuting_projection_nonzero_divergence():
    rng = np.random.default_rng(101)
    quad = random_convex_quad(rng)

    def v(x):
        return np.column_stack([x[:, 0] ** 2 * x[:, 1], x[:, 0] * x[:, 1] ** 2])

    def div_v(x):
        return 4.0 * x[:, 0] * x[:, 1]

    for r, variant in ((1, "reduced"), (2, "full")):
        el = MixedElement(quad, r, variant)
        assert commuting_residual(el, v, div_v) <= 1e-9


# -- scalar projection helper ---------------------------------------------------------


def test_project_scalar_reproduces_polynomials(square):
    basis, c = project_scalar(square, lambda x: 2.0 * x[:, 0] - x[:, 1] + 0.5, 1)
    x = np.random.default_rng(5).uniform(0.0, 1.0, (20, 2))
    vals = sum(ck * q.val(x) for ck, q in zip(c, basis))
    np.testing.assert_allclose(vals, 2.0 * x[:, 0] - x[:, 1] + 0.5, atol=1e-12)


def test_scalar_monomials_graded(square):
    mono = scalar_monomials(square, 2)
    assert len(mono) == 6
    x = np.array([[0.5, 0.5]])  # centroid: all non-constant members vanish
    vals = np.array([q.val(x)[0] for q in mono])
    assert vals[0] == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(vals[1:], 0.0, atol=1e-15)
