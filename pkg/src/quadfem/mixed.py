"""Direct mixed H(div) elements V_r (full) and V_r^red (reduced) on quads.

The vector space on a cell E decomposes as

    V_r(E) = curl P_{r+1}(E)  +  x P_s(E)  +  span{sigma_1, sigma_2},

with s = r (full) or s = r-1 (reduced).  The two supplements are the curls
of the direct serendipity supplements of index r+1:

    sigma_1 = curl(lambda_3 lambda_4 R_V lambda_H^{r-1}),
    sigma_2 = curl(lambda_1 lambda_2 R_H lambda_V^{r-1}),

evaluated analytically (rational variants), or as Piola images of reference
curls (mapped variant).  Degrees of freedom are edge normal moments against
P_r(e) on each edge, interior moments against gradients of P_s, and moments
against the H(div) bubbles curl(lambda_1 lambda_2 lambda_3 lambda_4 P_{r-3}).
Inverting the DoF matrix yields a DoF-dual basis, so the coefficients of the
projection pi_E are simply the DoF values of the projected field.

Every shape function has divergence in P_s and an edge normal trace in
P_r(e); div maps V_r(E) onto P_s(E) with the curls as kernel.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import legval

from .errors import SingularDoFMatrix, UnsupportedOrder
from .geometry import Quad
from .quadrature import cell_rule, edge_rule
from .serendipity import (
    Poly2,
    RationalProduct,
    SupplementChoice,
    build_directions,
)

MIXED_VARIANTS = ("full", "reduced")

# reference coordinates along each edge as a function of the edge parameter
_EDGE_XHAT = (
    lambda t: np.column_stack([np.full_like(t, -1.0), t]),
    lambda t: np.column_stack([np.full_like(t, 1.0), t]),
    lambda t: np.column_stack([t, np.full_like(t, -1.0)]),
    lambda t: np.column_stack([t, np.full_like(t, 1.0)]),
)


def edge_reference_coords(i, t):
    """Reference coordinates of edge i (1..4) at parameter values t."""
    return _EDGE_XHAT[i - 1](np.asarray(t, dtype=float))


def scalar_monomials(quad, s):
    """Scaled monomial basis of P_s(E), constant first (graded order)."""
    return [
        Poly2.monomial(a, tot - a, quad.centroid, quad.d)
        for tot in range(s + 1)
        for a in range(tot, -1, -1)
    ]


class PolyVec:
    """Polynomial vector field with a precomputed polynomial divergence."""

    __slots__ = ("p1", "p2", "pdiv")

    def __init__(self, p1, p2, pdiv):
        self.p1, self.p2, self.pdiv = p1, p2, pdiv

    def val(self, x, xhat=None):
        return np.column_stack([self.p1.val(x), self.p2.val(x)])

    def div(self, x, xhat=None):
        x = np.atleast_2d(x)
        if self.pdiv is None:
            return np.zeros(x.shape[0])
        return self.pdiv.val(x)


class CurlOf:
    """curl phi = (d phi/dx_2, -d phi/dx_1); divergence-free by identity."""

    __slots__ = ("fn",)

    def __init__(self, fn):
        self.fn = fn

    def val(self, x, xhat=None):
        g = self.fn.grad(x, xhat)
        return np.column_stack([g[:, 1], -g[:, 0]])

    def div(self, x, xhat=None):
        return np.zeros(np.atleast_2d(x).shape[0])


class PiolaRef:
    """Piola image (1/J) DF v-hat of a reference vector polynomial.

    The Piola transform scales divergences by 1/J, so a divergence-free
    reference field stays divergence-free; otherwise div = divhat(xhat)/J.
    """

    __slots__ = ("quad", "v1", "v2", "divhat")

    def __init__(self, quad, v1, v2, divhat=None):
        self.quad = quad
        self.v1, self.v2 = v1, v2
        self.divhat = divhat

    def _xhat(self, x, xhat):
        return np.atleast_2d(xhat) if xhat is not None else self.quad.map.inverse(x)

    def val(self, x, xhat=None):
        xh = self._xhat(x, xhat)
        vhat = np.column_stack([self.v1.val(xh), self.v2.val(xh)])
        return self.quad.map.piola(xh, vhat)

    def div(self, x, xhat=None):
        xh = self._xhat(x, xhat)
        if self.divhat is None:
            return np.zeros(xh.shape[0])
        _, J = self.quad.map.jacobian(xh)
        return self.divhat.val(xh) / J


class MixedElement:
    """A direct mixed element with its DoF-dual vector basis on one cell."""

    def __init__(self, quad, r, variant="reduced", choice=None):
        if r < 1:
            raise UnsupportedOrder("direct mixed elements need r >= 1")
        if variant not in MIXED_VARIANTS:
            raise ValueError(f"unknown mixed variant {variant!r}")
        self.quad = quad
        self.r = int(r)
        self.variant = variant
        self.s = self.r if variant == "full" else self.r - 1
        self.choice = choice if choice is not None else SupplementChoice.simple()
        self.dirs = build_directions(quad, self.choice)
        self.span = self._build_span()
        self.dim = len(self.span)
        self.w_basis = scalar_monomials(quad, self.s)
        # DoF quadrature: any order at or above the polynomial-exactness
        # minimum (edge r+2, cell r+3) defines the same element on the
        # polynomial part; generous orders keep the quadrature error of the
        # rational supplements and of projected smooth fields far below the
        # commuting-diagram test tolerance.
        ke, kc = max(self.r + 2, 12), max(self.r + 3, 10)
        self._edge_quad = [edge_rule(quad, i, ke) for i in range(1, 5)]
        self._cell_quad = cell_rule(quad, kc)
        self.coeff = self._invert_dofs()

    # -- construction ---------------------------------------------------

    def _build_span(self):
        quad, r, s = self.quad, self.r, self.s
        c, d = quad.centroid, quad.d
        span = []
        # curls of P_{r+1} monomials (constant omitted): for m = u1^a u2^b
        # the rotated reference gradient (b u1^a u2^{b-1}, -a u1^{a-1} u2^b)
        for tot in range(1, r + 2):
            for a in range(tot, -1, -1):
                b = tot - a
                p1 = b * Poly2.monomial(a, b - 1, c, d) if b else Poly2.constant(0.0, c, d)
                p2 = -a * Poly2.monomial(a - 1, b, c, d) if a else Poly2.constant(0.0, c, d)
                span.append(PolyVec(p1, p2, None))
        # x-type members u m(u) with divergence (2 + a + b)/d m(u)
        for tot in range(s + 1):
            for a in range(tot, -1, -1):
                b = tot - a
                span.append(
                    PolyVec(
                        Poly2.monomial(a + 1, b, c, d),
                        Poly2.monomial(a, b + 1, c, d),
                        ((2.0 + tot) / d) * Poly2.monomial(a, b, c, d),
                    )
                )
        # supplements: curls of the index-(r+1) serendipity supplements
        dirs = self.dirs
        if self.choice.variant == "mapped":
            u1, u2 = Poly2.monomial(1, 0), Poly2.monomial(0, 1)
            one = Poly2.constant(1.0)
            for ref in ((one - u2 * u2) * u1 * u2.power(r - 1),
                        (one - u1 * u1) * u2 * u1.power(r - 1)):
                g1, g2 = _poly_grad(ref)
                span.append(PiolaRef(self.quad, g2, -1.0 * g1))
        else:
            lam = dirs.lam
            scale = d ** -float(r)
            pre_h = lam[2] * lam[3] * dirs.lam_h.power(r - 1) * scale
            pre_v = lam[0] * lam[1] * dirs.lam_v.power(r - 1) * scale
            span.append(CurlOf(RationalProduct(pre_h, dirs.r_v)))
            span.append(CurlOf(RationalProduct(pre_v, dirs.r_h)))
        return span

    def _bubbles(self):
        quad, r = self.quad, self.r
        bub = self.dirs.lam[0] * self.dirs.lam[1] * self.dirs.lam[2] * self.dirs.lam[3]
        bub = bub * quad.d ** -4.0
        return [
            CurlOf(bub * Poly2.monomial(a, tot - a, quad.centroid, quad.d))
            for tot in range(r - 2)
            for a in range(tot, -1, -1)
        ]

    def num_edge_dofs(self):
        return 4 * (self.r + 1)

    def _apply_dofs(self, val_edge, val_cell):
        """Apply all DoF functionals given evaluation callbacks.

        ``val_edge(i)`` returns the field values (n, 2) at the cached
        quadrature points of edge i; ``val_cell()`` the values at the cell
        rule points.  Returns the DoF vector in the fixed ordering: edge
        moments (edge-major, Legendre degree minor), then gradient moments,
        then bubble moments.
        """
        r, s = self.r, self.s
        out = []
        for i in range(4):
            x, w, t = self._edge_quad[i]
            nu = self.quad.edges[i].normal
            flux = val_edge(i) @ nu
            for k in range(r + 1):
                ek = np.zeros(k + 1)
                ek[k] = 1.0
                out.append(np.sum(w * legval(t, ek) * flux))
        x, w, xh = self._cell_quad
        vals = None
        if s >= 1 or r >= 3:
            vals = val_cell()
        for q in self.w_basis[1:]:
            gq = q.grad(x)
            out.append(np.sum(w * np.sum(vals * gq, axis=1)))
        for beta in self._bubbles():
            bv = beta.val(x, xh)
            out.append(np.sum(w * np.sum(vals * bv, axis=1)))
        return np.array(out)

    def _invert_dofs(self):
        N = np.empty((self.dim, self.dim))
        for j, fn in enumerate(self.span):
            def val_edge(i, fn=fn):
                x, w, t = self._edge_quad[i]
                return fn.val(x, _EDGE_XHAT[i](t))

            def val_cell(fn=fn):
                x, w, xh = self._cell_quad
                return fn.val(x, xh)

            # row j holds all DoF values of span_j, so that inv(N) gives the
            # dual-basis coefficients with function index first
            N[j, :] = self._apply_dofs(val_edge, val_cell)
        self.dof_matrix = N
        try:
            coeff = np.linalg.inv(N)
        except np.linalg.LinAlgError:
            raise SingularDoFMatrix(
                "mixed DoF matrix is singular; element is not unisolvent"
            ) from None
        if not np.isfinite(coeff).all():
            raise SingularDoFMatrix("mixed DoF matrix inversion overflowed")
        return coeff

    # -- evaluation -------------------------------------------------------

    def eval_span(self, x, xhat=None):
        x = np.atleast_2d(x)
        return np.stack([fn.val(x, xhat) for fn in self.span])

    def eval_basis(self, x, xhat=None):
        """Values (dim, n, 2) of the DoF-dual basis."""
        return np.einsum("ij,jnk->ink", self.coeff, self.eval_span(x, xhat))

    def eval_basis_div(self, x, xhat=None):
        x = np.atleast_2d(x)
        divs = np.stack([fn.div(x, xhat) for fn in self.span])
        return self.coeff @ divs


def _poly_grad(p):
    """Both partial derivatives of a Poly2, as Poly2 objects."""
    c = p.coef
    cx = c[1:, :] * (np.arange(1, c.shape[0])[:, None] / p.scale)
    cy = c[:, 1:] * (np.arange(1, c.shape[1])[None, :] / p.scale)
    if cx.size == 0:
        cx = np.zeros((1, 1))
    if cy.size == 0:
        cy = np.zeros((1, 1))
    return Poly2(cx, p.center, p.scale), Poly2(cy, p.center, p.scale)


def build_mixed_element(quad, r, variant="reduced", choice=None):
    """Construct a direct mixed element (thin functional wrapper)."""
    return MixedElement(quad, r, variant, choice)


def eval_vector_basis(element, x, xhat=None):
    """Values (dim, n, 2) and divergences (dim, n) of the vector basis."""
    return element.eval_basis(x, xhat), element.eval_basis_div(x, xhat)


def project_mixed(element, v):
    """Coefficients of the local projection pi_E applied to a vector field.

    The coefficients in the DoF-dual basis are the DoF values of ``v``,
    computed with the element's own quadrature rules.
    """

    def val_edge(i):
        x, w, t = element._edge_quad[i]
        return np.asarray(v(x), dtype=float)

    def val_cell():
        x, w, xh = element._cell_quad
        return np.asarray(v(x), dtype=float)

    return element._apply_dofs(val_edge, val_cell)


def project_scalar(quad, f, s, k=None):
    """L2 projection of f onto P_s(E); returns (basis list, coefficients)."""
    basis = scalar_monomials(quad, s)
    x, w, _ = cell_rule(quad, k if k is not None else s + 3)
    V = np.column_stack([q.val(x) for q in basis])
    G = V.T @ (V * w[:, None])
    rhs = V.T @ (w * np.asarray(f(x), dtype=float))
    return basis, np.linalg.solve(G, rhs)
