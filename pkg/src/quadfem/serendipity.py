"""Direct serendipity elements DS_r(E) = P_r(E) + two supplemental functions.

On a convex quadrilateral E with edges e_1 (left), e_2 (right), e_3 (bottom),
e_4 (top) and edge distance functions lambda_1..lambda_4, the element of
index r >= 2 has D_r = dim P_r + 2 nodal degrees of freedom: the 4 vertices,
r-1 equally spaced points interior to each edge, and (r-2)(r-3)/2 cell
points.  The shape functions are

* vertex:  lambda_2 lambda_4 (etc., one product per corner),
* cell:    lambda_1 lambda_2 lambda_3 lambda_4 * P_{r-4} monomials,
* edge (H family, serving e_1 and e_2):
      lambda_3 lambda_4 lambda_H^j            j = 0..r-2,
      lambda_3 lambda_4 lambda_12 lambda_H^j  j = 0..r-3,
      lambda_3 lambda_4 R_V lambda_H^{r-2},
  and the mirrored V family with lambda_1 lambda_2, lambda_V, lambda_34, R_H.

The direction function lambda_H = lambda_3 - lambda_4 is linear; R_V is a
bounded function equal to -eta_V on e_1 and xi_V on e_2.  Four supplement
choices are provided: ``simple`` (rational R with user constants),
``geometric`` (rational R with constants from the edge-normal geometry),
``lemma`` (the explicit rational R-tilde that also admits a closed-form
nodal basis), and ``mapped`` (supplements pulled through the bilinear map
from the reference square).  A nodal basis is produced by inverting the
4r x 4r boundary DoF matrix, which is block upper triangular when functions
and nodes are grouped as [vertices | e_1, e_2 | e_3, e_4].
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.polynomial import polyval2d

from .errors import SingularDoFMatrix, SingularExpansion, UnsupportedOrder
from .geometry import Quad

VARIANTS = ("simple", "geometric", "lemma", "mapped")


# ---------------------------------------------------------------------------
# function representations
# ---------------------------------------------------------------------------

class Poly2:
    """Bivariate polynomial in scaled coordinates u = (x - center)/scale.

    ``coef[a, b]`` multiplies u_1^a u_2^b.  Working in scaled coordinates
    keeps all coefficient magnitudes O(1) independently of the cell size.
    """

    __slots__ = ("coef", "center", "scale", "_gc")

    def __init__(self, coef, center=(0.0, 0.0), scale=1.0):
        self.coef = np.atleast_2d(np.asarray(coef, dtype=float))
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self._gc = None

    @classmethod
    def constant(cls, value, center=(0.0, 0.0), scale=1.0):
        return cls([[float(value)]], center, scale)

    @classmethod
    def from_affine(cls, a0, a, center=(0.0, 0.0), scale=1.0):
        """The physical affine function a0 + a . x, re-expressed in u."""
        a = np.asarray(a, dtype=float)
        c = np.asarray(center, dtype=float)
        coef = np.zeros((2, 2))
        coef[0, 0] = a0 + a @ c
        coef[1, 0] = scale * a[0]
        coef[0, 1] = scale * a[1]
        return cls(coef, center, scale)

    @classmethod
    def monomial(cls, a, b, center=(0.0, 0.0), scale=1.0):
        coef = np.zeros((a + 1, b + 1))
        coef[a, b] = 1.0
        return cls(coef, center, scale)

    def _wrap(self, coef):
        return Poly2(coef, self.center, self.scale)

    def __add__(self, other):
        if np.isscalar(other):
            coef = self.coef.copy()
            coef[0, 0] += other
            return self._wrap(coef)
        n1 = max(self.coef.shape[0], other.coef.shape[0])
        n2 = max(self.coef.shape[1], other.coef.shape[1])
        coef = np.zeros((n1, n2))
        coef[: self.coef.shape[0], : self.coef.shape[1]] = self.coef
        coef[: other.coef.shape[0], : other.coef.shape[1]] += other.coef
        return self._wrap(coef)

    __radd__ = __add__

    def __neg__(self):
        return self._wrap(-self.coef)

    def __sub__(self, other):
        return self + (-other if not np.isscalar(other) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return self._wrap(self.coef * other)
        A, B = self.coef, other.coef
        out = np.zeros((A.shape[0] + B.shape[0] - 1, A.shape[1] + B.shape[1] - 1))
        for i in range(A.shape[0]):
            for j in range(A.shape[1]):
                if A[i, j] != 0.0:
                    out[i : i + B.shape[0], j : j + B.shape[1]] += A[i, j] * B
        return self._wrap(out)

    __rmul__ = __mul__

    __rmul__ = __mul__

    def power(self, k):
        out = Poly2.constant(1.0, self.center, self.scale)
        for _ in range(k):
            out = out * self
        return out

    def _u(self, x):
        return (np.atleast_2d(x) - self.center) / self.scale

    def val(self, x, xhat=None):
        u = self._u(x)
        return polyval2d(u[:, 0], u[:, 1], self.coef)

    def grad(self, x, xhat=None):
        if self._gc is None:
            c = self.coef
            cx = c[1:, :] * (np.arange(1, c.shape[0])[:, None] / self.scale)
            cy = c[:, 1:] * (np.arange(1, c.shape[1])[None, :] / self.scale)
            if cx.size == 0:
                cx = np.zeros((1, 1))
            if cy.size == 0:
                cy = np.zeros((1, 1))
            self._gc = (cx, cy)
        u = self._u(x)
        cx, cy = self._gc
        g = np.empty((u.shape[0], 2))
        g[:, 0] = polyval2d(u[:, 0], u[:, 1], cx)
        g[:, 1] = polyval2d(u[:, 0], u[:, 1], cy)
        return g


class Ratio:
    """Quotient num/den of two polynomials with nonvanishing den on the cell."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num = num
        self.den = den

    def val(self, x, xhat=None):
        return self.num.val(x) / self.den.val(x)

    def grad(self, x, xhat=None):
        n = self.num.val(x)
        d = self.den.val(x)
        gn = self.num.grad(x)
        gd = self.den.grad(x)
        return (gn * d[:, None] - n[:, None] * gd) / (d * d)[:, None]


class RationalProduct:
    """P(x) * R(x) with polynomial P and bounded ratio R (the supplements)."""

    __slots__ = ("P", "R")

    def __init__(self, P, R):
        self.P = P
        self.R = R

    def val(self, x, xhat=None):
        return self.P.val(x) * self.R.val(x, xhat)

    def grad(self, x, xhat=None):
        p = self.P.val(x)
        r = self.R.val(x, xhat)
        return self.P.grad(x) * r[:, None] + p[:, None] * self.R.grad(x, xhat)


class MappedFn:
    """A reference polynomial composed with the inverse bilinear map.

    Gradients come from the chain rule, grad = DF^{-T} grad-hat.  Callers
    that already know the reference coordinates pass them as ``xhat`` to
    skip the Newton inversion.
    """

    __slots__ = ("quad", "ref")

    def __init__(self, quad, ref):
        self.quad = quad
        self.ref = ref

    def _xhat(self, x, xhat):
        return np.atleast_2d(xhat) if xhat is not None else self.quad.map.inverse(x)

    def val(self, x, xhat=None):
        return self.ref.val(self._xhat(x, xhat))

    def grad(self, x, xhat=None):
        xh = self._xhat(x, xhat)
        gh = self.ref.grad(xh)
        DF, J = self.quad.map.jacobian(xh)
        g = np.empty_like(gh)
        g[:, 0] = (DF[:, 1, 1] * gh[:, 0] - DF[:, 1, 0] * gh[:, 1]) / J
        g[:, 1] = (-DF[:, 0, 1] * gh[:, 0] + DF[:, 0, 0] * gh[:, 1]) / J
        return g


# ---------------------------------------------------------------------------
# supplement choice and direction functions
# ---------------------------------------------------------------------------

class SupplementChoice:
    """Which supplemental pair closes P_r, and its edge-value constants."""

    __slots__ = ("variant", "xi_v", "eta_v", "xi_h", "eta_h")

    def __init__(self, variant, xi_v=1.0, eta_v=1.0, xi_h=1.0, eta_h=1.0):
        if variant not in VARIANTS:
            raise ValueError(f"unknown supplement variant {variant!r}")
        if min(xi_v, eta_v, xi_h, eta_h) <= 0:
            raise ValueError("supplement constants must be positive")
        self.variant = variant
        self.xi_v, self.eta_v = float(xi_v), float(eta_v)
        self.xi_h, self.eta_h = float(xi_h), float(eta_h)

    @classmethod
    def simple(cls, xi_v=1.0, eta_v=1.0, xi_h=1.0, eta_h=1.0):
        return cls("simple", xi_v, eta_v, xi_h, eta_h)

    @classmethod
    def geometric(cls):
        return cls("geometric")

    @classmethod
    def lemma(cls, xi_v=1.0, eta_v=1.0, xi_h=1.0, eta_h=1.0):
        return cls("lemma", xi_v, eta_v, xi_h, eta_h)

    @classmethod
    def mapped(cls):
        return cls("mapped")

    def __repr__(self):  # pragma: no cover
        return f"SupplementChoice({self.variant!r})"


class DirectionFunctions:
    """Linear direction functions, expansion constants and the R pair."""

    __slots__ = (
        "lam", "lam_h", "lam_v", "parallel_h", "parallel_v",
        "alpha_h", "beta_h", "gamma_h", "delta_h",
        "alpha_v", "beta_v", "gamma_v", "delta_v",
        "lam12", "lam34", "r_v", "r_h",
        "xi_v", "eta_v", "xi_h", "eta_h",
    )


def _expand(target, la, lb, h):
    """Solve target = alpha*la + beta*lb + gamma for affine Poly2 inputs.

    Returns (alpha, beta, gamma) with the sign normalized so alpha+beta > 0.
    """
    def coeffs(p):
        c = np.zeros(3)
        c[0] = p.coef[0, 0]
        if p.coef.shape[0] > 1:
            c[1] = p.coef[1, 0]
        if p.coef.shape[1] > 1:
            c[2] = p.coef[0, 1]
        return c

    M = np.column_stack([coeffs(la), coeffs(lb), [1.0, 0.0, 0.0]])
    rhs = coeffs(target)
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        raise SingularExpansion(
            "direction function cannot be expanded in the opposite edge pair"
        ) from None
    if not np.isfinite(sol).all():
        raise SingularExpansion("direction expansion produced non-finite constants")
    alpha, beta, gamma = sol
    if alpha + beta < 0:
        alpha, beta, gamma = -alpha, -beta, -gamma
    return alpha, beta, gamma


def _geometric_constants(quad):
    """Edge-value constants from the geometry of the four edge normals.

    nu_H is the unit normal of the direction line for the (e_1, e_2) pair;
    each constant is 1/sqrt(1 - cos^2) of the angle that line makes with
    the edge it meets, so all four are 1 on rectangles.
    """
    n1, n2, n3, n4 = (quad.edges[i].normal for i in range(4))
    nu_h = (n3 - n4) / np.linalg.norm(n3 - n4)
    nu_v = (n1 - n2) / np.linalg.norm(n1 - n2)

    def const(nu, n):
        s = 1.0 - (nu @ n) ** 2
        if s <= 1e-24:
            raise SingularExpansion(
                "direction line is parallel to an edge normal; "
                "geometric constants are unbounded"
            )
        return 1.0 / np.sqrt(s)

    xi_v = const(nu_h, n2)
    eta_v = const(nu_h, n1)
    xi_h = const(nu_v, n4)
    eta_h = const(nu_v, n3)
    return xi_v, eta_v, xi_h, eta_h


def build_directions(quad, choice):
    """Construct all direction machinery for one cell and one variant."""
    d = DirectionFunctions()
    c, s = quad.centroid, quad.d
    lam = []
    for e in quad.edges:
        lam.append(Poly2.from_affine(e.midpoint @ e.normal, -e.normal, c, s))
    d.lam = lam
    d.lam_h = lam[2] - lam[3]
    d.lam_v = lam[0] - lam[1]
    d.parallel_h = quad.edges_parallel(1, 2)
    d.parallel_v = quad.edges_parallel(3, 4)

    tol = 1e-12 * quad.h
    d.alpha_h = d.beta_h = d.gamma_h = d.delta_h = None
    d.alpha_v = d.beta_v = d.gamma_v = d.delta_v = None
    if d.parallel_h:
        d.delta_h = (lam[0] + lam[1]).coef[0, 0]
    else:
        d.alpha_h, d.beta_h, d.gamma_h = _expand(d.lam_h, lam[0], lam[1], quad.h)
    if d.parallel_v:
        d.delta_v = (lam[2] + lam[3]).coef[0, 0]
    else:
        d.alpha_v, d.beta_v, d.gamma_v = _expand(d.lam_v, lam[2], lam[3], quad.h)

    if choice.variant == "geometric":
        d.xi_v, d.eta_v, d.xi_h, d.eta_h = _geometric_constants(quad)
    elif choice.variant == "mapped":
        d.xi_v = d.eta_v = d.xi_h = d.eta_h = 1.0
    else:
        d.xi_v, d.eta_v = choice.xi_v, choice.eta_v
        d.xi_h, d.eta_h = choice.xi_h, choice.eta_h

    if d.parallel_h:
        d.lam12 = d.xi_v * lam[0] - d.eta_v * lam[1]
    else:
        d.lam12 = (d.alpha_h * d.xi_v) * lam[0] - (d.beta_h * d.eta_v) * lam[1]
    if d.parallel_v:
        d.lam34 = d.xi_h * lam[2] - d.eta_h * lam[3]
    else:
        d.lam34 = (d.alpha_v * d.xi_h) * lam[2] - (d.beta_v * d.eta_h) * lam[3]

    if choice.variant in ("simple", "geometric"):
        d.r_v = Ratio(lam[0] - lam[1], (1 / d.xi_v) * lam[0] + (1 / d.eta_v) * lam[1])
        d.r_h = Ratio(lam[2] - lam[3], (1 / d.xi_h) * lam[2] + (1 / d.eta_h) * lam[3])
    elif choice.variant == "lemma":
        if d.parallel_h:
            d.r_v = Ratio(d.lam12, Poly2.constant(d.delta_h, c, s))
        else:
            if d.alpha_h <= 0 or d.beta_h <= 0 or abs(d.gamma_h) <= tol:
                raise SingularExpansion(
                    "expansion constants violate the sign conditions; the "
                    "explicit supplement is singular on this cell"
                )
            d.r_v = Ratio(d.lam12, d.alpha_h * lam[0] + d.beta_h * lam[1])
        if d.parallel_v:
            d.r_h = Ratio(d.lam34, Poly2.constant(d.delta_v, c, s))
        else:
            if d.alpha_v <= 0 or d.beta_v <= 0 or abs(d.gamma_v) <= tol:
                raise SingularExpansion(
                    "expansion constants violate the sign conditions; the "
                    "explicit supplement is singular on this cell"
                )
            d.r_h = Ratio(d.lam34, d.alpha_v * lam[2] + d.beta_v * lam[3])
    else:  # mapped
        d.r_v = MappedFn(quad, Poly2.monomial(1, 0))
        d.r_h = MappedFn(quad, Poly2.monomial(0, 1))
    return d


# ---------------------------------------------------------------------------
# nodal points
# ---------------------------------------------------------------------------

def _interior_count(r):
    return (r - 2) * (r - 3) // 2 if r >= 4 else 0


def nodal_points(quad, r):
    """Vertices, r-1 equispaced points per edge, and the interior lattice.

    Interior points (r >= 4) are the order-(r-4) Lagrange nodes of the
    triangle with vertices F_E(-1/2,-1/2), F_E(1/2,-1/2), F_E(0,1/2),
    which sits strictly inside any convex cell.
    """
    if r < 2:
        raise UnsupportedOrder("direct serendipity elements need r >= 2")
    pts = [quad.vertices[i] for i in range(4)]
    for e in quad.edges:
        for k in range(1, r):
            pts.append(e.points(np.array([-1.0 + 2.0 * k / r]))[0])
    if r >= 4:
        tri = quad.map.forward(
            np.array([[-0.5, -0.5], [0.5, -0.5], [0.0, 0.5]])
        )
        m = r - 4
        if m == 0:
            pts.append(tri.mean(axis=0))
        else:
            for i in range(m, -1, -1):
                for j in range(m - i, -1, -1):
                    k = m - i - j
                    pts.append((i * tri[0] + j * tri[1] + k * tri[2]) / m)
    return np.array(pts)


def _nodal_xhat(quad, r, nodes):
    """Reference coordinates of the nodal points (interior ones by Newton)."""
    xh = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
    t = [-1.0 + 2.0 * k / r for k in range(1, r)]
    xh += [(-1.0, tk) for tk in t]
    xh += [(1.0, tk) for tk in t]
    xh += [(tk, -1.0) for tk in t]
    xh += [(tk, 1.0) for tk in t]
    xh = np.array(xh)
    m = _interior_count(r)
    if m:
        xh = np.vstack([xh, quad.map.inverse(nodes[-m:])])
    return xh


# ---------------------------------------------------------------------------
# the element
# ---------------------------------------------------------------------------

class DSElement:
    """A direct serendipity element with its nodal basis on one cell."""

    def __init__(self, quad, r, choice=None):
        if r < 2:
            raise UnsupportedOrder("direct serendipity elements need r >= 2")
        self.quad = quad
        self.r = int(r)
        self.choice = choice if choice is not None else SupplementChoice.geometric()
        self.dirs = build_directions(quad, self.choice)
        self.nodes = nodal_points(quad, self.r)
        self.node_xhat = _nodal_xhat(quad, self.r, self.nodes)
        self.num_boundary = 4 * self.r
        self.dim = len(self.nodes)
        self.pre, self.scales = self._build_pre_basis()
        self.coeff = None
        build_nodal_basis(self)

    # pre-basis ---------------------------------------------------------

    def _build_pre_basis(self):
        r, dirs, quad = self.r, self.dirs, self.quad
        lam = dirs.lam
        dE = quad.d
        pre, scales = [], []

        def add(fn, n_phi):
            pre.append(fn)
            scales.append(dE ** n_phi)

        # vertex functions paired with corners v0..v3
        for i, j in ((1, 3), (0, 3), (0, 2), (1, 2)):
            add(lam[i] * lam[j] * dE ** -2.0, 2)

        pow_h = [Poly2.constant(1.0, quad.centroid, dE)]
        pow_v = [Poly2.constant(1.0, quad.centroid, dE)]
        for _ in range(max(r - 2, 0)):
            pow_h.append(pow_h[-1] * dirs.lam_h)
            pow_v.append(pow_v[-1] * dirs.lam_v)
        base_h = lam[2] * lam[3]
        base_v = lam[0] * lam[1]

        for j in range(r - 1):
            add(base_h * pow_h[j] * dE ** -(2.0 + j), 2 + j)
        for j in range(r - 2):
            add(base_h * dirs.lam12 * pow_h[j] * dE ** -(3.0 + j), 3 + j)
        if self.choice.variant == "mapped":
            one = Poly2.constant(1.0)
            u1, u2 = Poly2.monomial(1, 0), Poly2.monomial(0, 1)
            ref = (one - u2 * u2) * u1 * u2.power(r - 2)
            add(MappedFn(quad, ref), 0)
        else:
            add(RationalProduct(base_h * pow_h[r - 2] * dE ** -float(r), dirs.r_v), r)

        for j in range(r - 1):
            add(base_v * pow_v[j] * dE ** -(2.0 + j), 2 + j)
        for j in range(r - 2):
            add(base_v * dirs.lam34 * pow_v[j] * dE ** -(3.0 + j), 3 + j)
        if self.choice.variant == "mapped":
            ref = (one - u1 * u1) * u2 * u1.power(r - 2)
            add(MappedFn(quad, ref), 0)
        else:
            add(RationalProduct(base_v * pow_v[r - 2] * dE ** -float(r), dirs.r_h), r)

        bubble = base_h * base_v * dE ** -4.0
        for tot in range(r - 3):
            for a in range(tot, -1, -1):
                add(bubble * Poly2.monomial(a, tot - a, quad.centroid, dE), 4)
        assert len(pre) == self.dim
        return pre, scales

    # evaluation --------------------------------------------------------

    def eval_pre(self, x, xhat=None):
        x = np.atleast_2d(x)
        return np.vstack([f.val(x, xhat) for f in self.pre])

    def eval_pre_grad(self, x, xhat=None):
        x = np.atleast_2d(x)
        return np.stack([f.grad(x, xhat) for f in self.pre])

    def eval_basis(self, x, xhat=None):
        return self.coeff @ self.eval_pre(x, xhat)

    def eval_basis_grad(self, x, xhat=None):
        return np.einsum("ij,jnk->ink", self.coeff, self.eval_pre_grad(x, xhat))


def eval_pre_basis(element, x, xhat=None):
    """Values (D, n) and gradients (D, n, 2) of the scaled pre-basis."""
    return element.eval_pre(x, xhat), element.eval_pre_grad(x, xhat)


def build_nodal_basis(element):
    """Invert the DoF matrix; returns (and caches) the coefficient table.

    Row i of the table expresses nodal basis function i in the pre-basis.
    The 4r x 4r boundary matrix A[i, j] = phi_i(x_j) is inverted by dense
    LU; cell functions are normalized to Kronecker form on the interior
    nodes by inverting the interior block, and the interior values of the
    boundary functions are then corrected.
    """
    if element.coeff is not None:
        return element.coeff
    nb = element.num_boundary
    V = element.eval_pre(element.nodes, element.node_xhat)
    try:
        B = np.linalg.inv(V[:nb, :nb])
    except np.linalg.LinAlgError:
        raise SingularDoFMatrix(
            "boundary DoF matrix is singular; element is not unisolvent"
        ) from None
    if not np.isfinite(B).all():
        raise SingularDoFMatrix("boundary DoF matrix inversion overflowed")
    C = np.zeros((element.dim, element.dim))
    C[:nb, :nb] = B
    if element.dim > nb:
        try:
            W = np.linalg.inv(V[nb:, nb:])
        except np.linalg.LinAlgError:
            raise SingularDoFMatrix("interior DoF block is singular") from None
        C[nb:, nb:] = W
        g = B @ V[:nb, nb:]
        C[:nb] -= g @ C[nb:]
    element.coeff = C
    return C


# ---------------------------------------------------------------------------
# explicit nodal basis for the "lemma" supplement
# ---------------------------------------------------------------------------

def _explicit_boundary(element, x, xhat=None):
    """The closed-form 4r boundary nodal functions, before interior fixup."""
    r, dirs = element.r, element.dirs
    x = np.atleast_2d(x)
    lam_v = [p.val(x) for p in dirs.lam]
    lh = dirs.lam_h.val(x)
    lv = dirs.lam_v.val(x)
    rv = dirs.r_v.val(x, xhat)
    rh = dirs.r_h.val(x, xhat)
    xi_v, eta_v = dirs.xi_v, dirs.eta_v
    xi_h, eta_h = dirs.xi_h, dirs.eta_h

    out = np.zeros((4 * r, x.shape[0]))

    # edge functions: bubble of the opposite pair, the R factor selecting
    # one edge of the pair, and a Lagrange product in the direction function
    edge_rows = {}
    for ei in range(4):
        nodes = element.nodes[4 + ei * (r - 1) : 4 + (ei + 1) * (r - 1)]
        if ei < 2:  # e_1, e_2
            bubble = lam_v[2] * lam_v[3]
            bub_n = dirs.lam[2].val(nodes) * dirs.lam[3].val(nodes)
            direction, dir_n = lh, dirs.lam_h.val(nodes)
            fac = (xi_v - rv) / (xi_v + eta_v) if ei == 0 else (rv + eta_v) / (xi_v + eta_v)
        else:  # e_3, e_4
            bubble = lam_v[0] * lam_v[1]
            bub_n = dirs.lam[0].val(nodes) * dirs.lam[1].val(nodes)
            direction, dir_n = lv, dirs.lam_v.val(nodes)
            fac = (xi_h - rh) / (xi_h + eta_h) if ei == 2 else (rh + eta_h) / (xi_h + eta_h)
        for j in range(r - 1):
            lagr = np.ones(x.shape[0])
            for k in range(r - 1):
                if k != j:
                    lagr *= (direction - dir_n[k]) / (dir_n[j] - dir_n[k])
            row = 4 + ei * (r - 1) + j
            out[row] = bubble / bub_n[j] * fac * lagr
            edge_rows.setdefault(ei, []).append(row)

    # vertex functions: normalized two-lambda product minus its values at
    # the nodes of the two adjacent edges times those edge functions
    vertex_data = (
        ((1, 3), (0, 2)),  # v0 = e_1 ^ e_3
        ((0, 3), (1, 2)),  # v1 = e_2 ^ e_3
        ((0, 2), (1, 3)),  # v2 = e_2 ^ e_4
        ((1, 2), (0, 3)),  # v3 = e_1 ^ e_4
    )
    for vi, ((la, lb), adj) in enumerate(vertex_data):
        vx = element.nodes[vi : vi + 1]
        denom = (dirs.lam[la].val(vx) * dirs.lam[lb].val(vx))[0]
        tilde = lam_v[la] * lam_v[lb] / denom
        out[vi] = tilde
        for ei in adj:
            nodes = element.nodes[4 + ei * (r - 1) : 4 + (ei + 1) * (r - 1)]
            tn = dirs.lam[la].val(nodes) * dirs.lam[lb].val(nodes) / denom
            for j, row in enumerate(edge_rows[ei]):
                out[vi] -= tn[j] * out[row]
    return out


def explicit_basis(element, x, xhat=None):
    """Closed-form nodal basis (lemma variant); matches the matrix route."""
    if element.choice.variant != "lemma":
        raise ValueError("the explicit nodal basis requires the lemma supplement")
    x = np.atleast_2d(x)
    nb = element.num_boundary
    Eb = _explicit_boundary(element, x, xhat)
    if element.dim == nb:
        return Eb
    pre_x = element.eval_pre(x, xhat)
    psi_int = element.coeff[nb:] @ pre_x
    m = element.dim - nb
    int_nodes = element.nodes[-m:]
    Eb -= _explicit_boundary(element, int_nodes, element.node_xhat[-m:]) @ psi_int
    return np.vstack([Eb, psi_int])


def interpolate(element, f):
    """Nodal interpolation: coefficient vector of f at the nodal points."""
    vals = np.asarray(f(element.nodes), dtype=float)
    if vals.shape != (element.dim,):
        raise ValueError("field must return one value per nodal point")
    return vals
