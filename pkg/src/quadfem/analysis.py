"""Error norms, convergence rates, DoF counts, and structural audits.

Gathers everything needed to turn solver output into convergence tables:
cell-accumulated L2 / H1-seminorm errors of continuous Galerkin solutions
and (p, u, div u) errors of hybrid mixed solutions, observed-order
extraction against the subdivision counts, closed-form global DoF counts,
and the per-element structural audit suites (nodal and DoF-dual
unisolvence, polynomial reproduction, inter-element continuity, edge
normal-trace degree, the curl inclusion and divergence exactness of the
discrete de Rham complex, and the commuting-projection identity).

Reports serialize to CSV and markdown; plotting lives in the reporting
layer, not here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import legvander

from .errors import NonPositiveError, QuadFemError
from .geometry import random_convex_quad, random_quad_pair
from .mixed import MixedElement, edge_reference_coords, project_mixed, project_scalar
from .quadrature import cell_rule, edge_rule
from .serendipity import (
    DSElement,
    Poly2,
    SupplementChoice,
    build_nodal_basis,
    explicit_basis,
    interpolate,
)

SUPPLEMENT_NAMES = ("simple", "geometric", "lemma", "mapped")


def supplement_choice(name):
    """SupplementChoice instance for one of the four family names."""
    if name not in SUPPLEMENT_NAMES:
        raise ValueError(f"unknown supplement family {name!r}")
    return getattr(SupplementChoice, name)()


# -- error norms --------------------------------------------------------


def galerkin_error_norms(solution, p, grad, k=None):
    """L2 and H1-seminorm errors of a continuous Galerkin solution.

    ``p`` and ``grad`` are vectorized callables returning (n,) and (n, 2)
    arrays; norms are accumulated cell by cell in index order with a
    degree-k tensor Gauss rule (default r + 5).
    """
    mesh, r = solution.mesh, solution.r
    kk = k if k is not None else r + 5
    e0 = e1 = 0.0
    for c, quad in enumerate(mesh.quads):
        x, w, xh = cell_rule(quad, kk)
        dp = solution.cell_values(c, x, xh) - np.asarray(p(x), dtype=float)
        e0 += w @ dp**2
        dg = solution.cell_gradients(c, x, xh) - np.asarray(grad(x), dtype=float)
        e1 += w @ np.sum(dg * dg, axis=1)
    return float(np.sqrt(e0)), float(np.sqrt(e1))


def mixed_error_norms(solution, p, u, div_u, k=None):
    """L2 errors of the scalar, vector, and divergence fields of a hybrid
    mixed solution, accumulated cell by cell in index order."""
    mesh, r = solution.mesh, solution.r
    kk = k if k is not None else r + 5
    ep = eu = ed = 0.0
    for c, quad in enumerate(mesh.quads):
        x, w, xh = cell_rule(quad, kk)
        dp = solution.cell_scalar(c, x) - np.asarray(p(x), dtype=float)
        ep += w @ dp**2
        du = solution.cell_vector(c, x, xh) - np.asarray(u(x), dtype=float)
        eu += w @ np.sum(du * du, axis=1)
        dd = solution.cell_divergence(c, x, xh) - np.asarray(div_u(x), dtype=float)
        ed += w @ dd**2
    return float(np.sqrt(ep)), float(np.sqrt(eu)), float(np.sqrt(ed))


def error_norms(mesh, solution, exact, k=None):
    """Cell-accumulated error norms of a discrete solution on ``mesh``.

    ``exact`` maps names to vectorized callables: 'p' and 'grad' for
    Galerkin solutions; 'p', 'u', and 'div' for mixed solutions.  Returns
    a dict keyed 'l2'/'h1' or 'p'/'u'/'div'.
    """
    if mesh is not solution.mesh:
        raise ValueError("solution was computed on a different mesh")
    if hasattr(solution, "cell_vector"):
        ep, eu, ed = mixed_error_norms(solution, exact["p"], exact["u"], exact["div"], k)
        return {"p": ep, "u": eu, "div": ed}
    el2, eh1 = galerkin_error_norms(solution, exact["p"], exact["grad"], k)
    return {"l2": el2, "h1": eh1}


# -- convergence rates and DoF counts ------------------------------------


def convergence_rates(errors, ns):
    """Observed orders log(e_{k-1}/e_k) / log(n_k/n_{k-1}).

    Returns a list aligned with ``errors`` whose first entry is None (no
    rate exists for the first level).  The subdivision counts need not
    double between levels.
    """
    if len(errors) != len(ns):
        raise ValueError("errors and ns must have equal length")
    rates = [None]
    for k in range(1, len(errors)):
        if ns[k] <= ns[k - 1]:
            raise ValueError("subdivision counts must increase")
        ek, ekm = float(errors[k]), float(errors[k - 1])
        if ek <= 0.0 or ekm <= 0.0:
            raise NonPositiveError("error values must be positive to extract a rate")
        rates.append(math.log(ekm / ek) / math.log(ns[k] / ns[k - 1]))
    return rates


DOF_KINDS = ("serendipity", "tensor", "mixed-full", "mixed-reduced")


def dof_count(r, n, kind="serendipity"):
    """Closed-form global DoF count on an n-by-n quadrilateral mesh.

    Serendipity: (1/2)(r^2 - r + 4)n^2 + 2rn + 1 (vertices + (r-1) per
    edge + (r-2)(r-3)/2 per cell).  Tensor-product baseline: (nr + 1)^2.
    Mixed kinds count dim V_h + dim W_h: r+1 normal moments per edge,
    r^2+1 (full) or r^2-r (reduced) interior vector DoFs per cell, plus
    the discontinuous P_s scalar block with s = r (full) or r-1 (reduced).
    """
    if kind == "serendipity":
        return (r * r - r + 4) * n * n // 2 + 2 * r * n + 1
    if kind == "tensor":
        return (n * r + 1) ** 2
    if kind in ("mixed-full", "mixed-reduced"):
        full = kind == "mixed-full"
        s = r if full else r - 1
        interior = r * r + 1 if full else r * r - r
        dim_w = (s + 1) * (s + 2) // 2
        return (r + 1) * 2 * n * (n + 1) + n * n * (interior + dim_w)
    raise ValueError(f"unknown DoF kind {kind!r}")


# -- structural audits ----------------------------------------------------


@dataclass
class AuditCheck:
    """One audit entry: a named residual compared against a tolerance."""

    name: str
    residual: float
    tol: float

    @property
    def passed(self):
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)

    def line(self):
        tag = "pass" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: residual {self.residual:.3e} (tol {self.tol:.1e})"


@dataclass
class AuditReport:
    """A batch of audit checks; passes only if every check passes."""

    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def extend(self, other):
        self.checks.extend(other.checks if isinstance(other, AuditReport) else other)

    def lines(self):
        return [c.line() for c in self.checks]

    def __str__(self):
        return "\n".join(self.lines())


def _rel_lstsq_residual(A, B):
    """Column-wise relative least-squares residual of B against range(A)."""
    sol, _, _, _ = np.linalg.lstsq(A, B, rcond=None)
    num = np.linalg.norm(B - A @ sol, axis=0)
    den = np.maximum(np.linalg.norm(B, axis=0), 1.0)
    return float(np.max(num / den))


def derham_inclusion_residual(ds_elem, v_elem, k=None):
    """Worst weighted L2-fit residual of curl(scalar basis) in the mixed span.

    The curl of every scalar shape function of index r+1 must lie exactly
    in the vector space of index r; the fit is taken at a tensor Gauss
    rule of degree k (default r + 4).
    """
    quad = v_elem.quad
    x, w, xh = cell_rule(quad, k if k is not None else v_elem.r + 4)
    G = ds_elem.eval_basis_grad(x, xh)
    curls = np.stack([G[:, :, 1], -G[:, :, 0]], axis=2)
    V = v_elem.eval_basis(x, xh)
    sw = np.sqrt(w)
    A = (V * sw[None, :, None]).reshape(v_elem.dim, -1).T
    B = (curls * sw[None, :, None]).reshape(ds_elem.dim, -1).T
    return _rel_lstsq_residual(A, B)


def trace_degree_residual(v_elem, npts=None):
    """Worst fit residual of the edge normal traces against P_r(e).

    Every vector shape function must have a polynomial normal trace of
    degree at most r on each edge; sampled at npts Gauss points per edge
    (default r + 3, enough to overdetermine the fit).
    """
    r = v_elem.r
    n = npts if npts is not None else r + 3
    worst = 0.0
    for i in range(4):
        x, _, t = edge_rule(v_elem.quad, i + 1, n)
        flux = v_elem.eval_basis(x, edge_reference_coords(i + 1, t))
        flux = flux @ v_elem.quad.edges[i].normal
        worst = max(worst, _rel_lstsq_residual(legvander(t, r), flux.T))
    return worst


def div_exactness_residual(v_elem, k=None):
    """Worst fit residual of the P_s monomials in span{div(vector basis)}.

    The divergence must map the vector space onto the full scalar space
    P_s; each scaled monomial is fit against the divergence samples.
    """
    x, w, xh = cell_rule(v_elem.quad, k if k is not None else v_elem.r + 4)
    sw = np.sqrt(w)
    A = (v_elem.eval_basis_div(x, xh) * sw[None, :]).T
    B = np.column_stack([q.val(x) for q in v_elem.w_basis]) * sw[:, None]
    return _rel_lstsq_residual(A, B)


def commuting_residual(v_elem, v=None, div_v=None, k=12):
    """L2 mismatch between P_W(div v) and div(pi_E v) on one cell.

    pi_E is the DoF-defined vector projection and P_W the L2 projection
    onto the scalar space; the two routes to the scalar field must agree
    for any smooth v.  The default field is v = (sin y, cos x), which is
    divergence-free.
    """
    if v is None:
        v = lambda x: np.column_stack([np.sin(x[:, 1]), np.cos(x[:, 0])])
        div_v = lambda x: np.zeros(x.shape[0])
    coeffs = project_mixed(v_elem, v)
    x, w, xh = cell_rule(v_elem.quad, k)
    div_pi = coeffs @ v_elem.eval_basis_div(x, xh)
    _, pw = project_scalar(v_elem.quad, div_v, v_elem.s, k)
    pw_vals = pw @ np.vstack([q.val(x) for q in v_elem.w_basis])
    return float(np.sqrt(np.sum(w * (pw_vals - div_pi) ** 2)))


def gradient_curl_identity_residual(ds_elem, npts=8):
    """max |grad(phi).tau - curl(phi).nu| over the four edges.

    With tau the counterclockwise tangent and nu the outward normal this
    holds pointwise for any differentiable phi, so it validates that the
    scalar gradients, the curl convention, and the edge orientations of
    the geometry all agree.
    """
    worst = 0.0
    for i in range(4):
        e = ds_elem.quad.edges[i]
        x, _, t = edge_rule(ds_elem.quad, i + 1, npts)
        G = ds_elem.eval_basis_grad(x, edge_reference_coords(i + 1, t))
        curl_nu = G[:, :, 1] * e.normal[0] - G[:, :, 0] * e.normal[1]
        worst = max(worst, float(np.max(np.abs(G @ e.tangent - curl_nu))))
    return worst


def mixed_unisolvence_residual(v_elem):
    """Deviation of the DoF matrix times its inverse from the identity."""
    eye = v_elem.coeff @ v_elem.dof_matrix
    return float(np.max(np.abs(eye - np.eye(v_elem.dim))))


def derham_audit(quad, r, choice=None, tol=1e-9, elements=None):
    """Structural audit of the discrete de Rham complex on one cell.

    Builds the scalar element of index r+1 and both mixed variants of
    index r with the given supplement family, then checks per variant:
    DoF-dual unisolvence, the curl inclusion, edge normal-trace degree,
    divergence exactness onto P_s, and the commuting-projection identity.
    Failures are report entries, not exceptions.  ``elements`` optionally
    substitutes prebuilt mixed elements per variant (negative controls).
    """
    if choice is None:
        choice = SupplementChoice.simple()
    checks = []
    ds = DSElement(quad, r + 1, choice)
    build_nodal_basis(ds)
    checks.append(
        AuditCheck(
            f"gradient/curl trace identity (scalar index {r + 1})",
            gradient_curl_identity_residual(ds),
            tol,
        )
    )
    for variant in ("full", "reduced"):
        if elements is not None and variant in elements:
            el = elements[variant]
        else:
            try:
                el = MixedElement(quad, r, variant, choice)
            except QuadFemError as exc:
                checks.append(AuditCheck(f"{variant}: construction ({exc})", np.inf, tol))
                continue
        checks.append(
            AuditCheck(f"{variant}: DoF-dual unisolvence", mixed_unisolvence_residual(el), tol)
        )
        checks.append(
            AuditCheck(f"{variant}: curl inclusion", derham_inclusion_residual(ds, el), tol)
        )
        checks.append(
            AuditCheck(f"{variant}: normal trace degree", trace_degree_residual(el), tol)
        )
        checks.append(
            AuditCheck(f"{variant}: div exactness onto P_s", div_exactness_residual(el), tol)
        )
        checks.append(
            AuditCheck(f"{variant}: commuting projection", commuting_residual(el), tol)
        )
    return AuditReport(checks)


def nodal_unisolvence_residual(quad, r, choice):
    """Kronecker-delta residual of the nodal basis at its own nodes."""
    el = DSElement(quad, r, choice)
    build_nodal_basis(el)
    V = el.eval_basis(el.nodes, el.node_xhat)
    return float(np.max(np.abs(V - np.eye(el.dim))))


def unisolvence_audit(r, samples=200, seed=42, choices=SUPPLEMENT_NAMES, tol=1e-7):
    """Nodal-basis unisolvence over seeded random convex quadrilaterals.

    For every supplement family, constructs the scalar element on
    ``samples`` random quads and records the worst Kronecker residual;
    a construction failure becomes an infinite-residual entry.
    """
    checks = []
    for name in choices:
        choice = supplement_choice(name)
        rng = np.random.default_rng(seed)
        worst, failure = 0.0, None
        for _ in range(samples):
            quad = random_convex_quad(rng)
            try:
                worst = max(worst, nodal_unisolvence_residual(quad, r, choice))
            except QuadFemError as exc:
                failure = exc
                break
        if failure is not None:
            checks.append(
                AuditCheck(f"nodal unisolvence r={r} [{name}] ({failure})", np.inf, tol)
            )
        else:
            checks.append(
                AuditCheck(
                    f"nodal unisolvence r={r} [{name}] over {samples} quads", worst, tol
                )
            )
    return AuditReport(checks)


def reproduction_audit(r, choice=None, samples=10, seed=42, tol=1e-9):
    """Nodal interpolation reproduces all polynomials of degree <= r."""
    if choice is None:
        choice = SupplementChoice.geometric()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        quad = random_convex_quad(rng)
        el = DSElement(quad, r, choice)
        build_nodal_basis(el)
        x, _, xh = cell_rule(quad, r + 3)
        basis = el.eval_basis(x, xh)
        for tot in range(r + 1):
            for a in range(tot + 1):
                p = Poly2.monomial(a, tot - a, quad.centroid, quad.d)
                vals = interpolate(el, p.val) @ basis
                worst = max(worst, float(np.max(np.abs(vals - p.val(x)))))
    return AuditCheck(f"polynomial reproduction r={r}", worst, tol)


def continuity_audit(r, choice=None, samples=20, seed=42, tol=1e-9, npts=9):
    """Shared-edge trace agreement of nodal interpolants on quad pairs.

    Interpolates one smooth field on two elements sharing an edge; the
    traces must coincide because they are determined by the shared
    vertex and edge nodes.
    """
    if choice is None:
        choice = SupplementChoice.geometric()

    def f(x):
        x = np.atleast_2d(x)
        return np.sin(1.3 * x[:, 0] + 0.4) * np.cos(0.9 * x[:, 1] - 0.2) + 0.5 * x[:, 0]

    rng = np.random.default_rng(seed)
    worst = 0.0
    t = np.linspace(-0.97, 0.97, npts)
    for _ in range(samples):
        left, right = random_quad_pair(rng)
        el_l = DSElement(left, r, choice)
        el_r = DSElement(right, r, choice)
        build_nodal_basis(el_l)
        build_nodal_basis(el_r)
        x = left.edges[1].points(t)
        vals_l = interpolate(el_l, f) @ el_l.eval_basis(x, edge_reference_coords(2, t))
        vals_r = interpolate(el_r, f) @ el_r.eval_basis(x, edge_reference_coords(1, t))
        worst = max(worst, float(np.max(np.abs(vals_l - vals_r))))
    return AuditCheck(f"inter-element continuity r={r}", worst, tol)


def gradient_audit(r, choice=None, samples=5, seed=42, tol=1e-5, step=1e-6):
    """Analytic basis gradients against central finite differences."""
    if choice is None:
        choice = SupplementChoice.geometric()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        quad = random_convex_quad(rng)
        el = DSElement(quad, r, choice)
        build_nodal_basis(el)
        xh = rng.uniform(-0.9, 0.9, size=(6, 2))
        x = quad.map.forward(xh)
        G = el.eval_basis_grad(x, xh)
        for axis in range(2):
            dx = np.zeros(2)
            dx[axis] = step
            fd = (el.eval_basis(x + dx) - el.eval_basis(x - dx)) / (2 * step)
            diff = np.abs(G[:, :, axis] - fd)
            scale = np.maximum(np.abs(G[:, :, axis]), 1.0)
            worst = max(worst, float(np.max(diff / scale)))
    return AuditCheck(f"gradient vs finite differences r={r}", worst, tol)


def explicit_basis_audit(r, samples=50, seed=42, tol=1e-9):
    """Closed-form nodal basis against the matrix-inverted one."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        quad = random_convex_quad(rng)
        el = DSElement(quad, r, SupplementChoice.lemma())
        build_nodal_basis(el)
        x, _, xh = cell_rule(quad, r + 3)
        diff = explicit_basis(el, x, xh) - el.eval_basis(x, xh)
        worst = max(worst, float(np.max(np.abs(diff))))
    return AuditCheck(f"explicit vs matrix nodal basis r={r}", worst, tol)


# -- convergence reports ---------------------------------------------------

GALERKIN_COLUMNS = (
    "family", "element", "variant", "r", "n", "dofs",
    "e_l2", "rate_l2", "e_h1", "rate_h1",
)
MIXED_COLUMNS = (
    "family", "variant", "r", "n", "dofs",
    "e_p", "rate_p", "e_u", "rate_u", "e_div", "rate_div",
)


def _format_cell(key, value):
    if value is None:
        return ""
    if key.startswith("e_"):
        return f"{value:.6e}"
    if key.startswith("rate_"):
        return f"{value:.3f}"
    return str(value)


@dataclass
class ConvergenceReport:
    """Rows of one convergence study, serializable to CSV and markdown.

    ``kind`` is 'galerkin' or 'mixed'; each row is a dict keyed by the
    corresponding column names, with rate entries None on the first row.
    """

    kind: str
    rows: list

    @property
    def columns(self):
        return GALERKIN_COLUMNS if self.kind == "galerkin" else MIXED_COLUMNS

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_format_cell(c, row.get(c)) for c in self.columns])
        return buf.getvalue()

    def to_markdown(self):
        cols = self.columns
        lines = [
            "| " + " | ".join(cols) + " |",
            "| " + " | ".join("---" for _ in cols) + " |",
        ]
        for row in self.rows:
            lines.append(
                "| " + " | ".join(_format_cell(c, row.get(c)) for c in cols) + " |"
            )
        return "\n".join(lines) + "\n"


def galerkin_report(family, element, variant, r, ns, dofs, e_l2, e_h1):
    """Assemble the Galerkin report rows, filling in observed rates."""
    r_l2 = convergence_rates(e_l2, ns)
    r_h1 = convergence_rates(e_h1, ns)
    rows = [
        {
            "family": family, "element": element, "variant": variant,
            "r": r, "n": n, "dofs": dofs[i],
            "e_l2": e_l2[i], "rate_l2": r_l2[i],
            "e_h1": e_h1[i], "rate_h1": r_h1[i],
        }
        for i, n in enumerate(ns)
    ]
    return ConvergenceReport("galerkin", rows)


def mixed_report(family, variant, r, ns, dofs, e_p, e_u, e_div):
    """Assemble the mixed report rows, filling in observed rates."""
    r_p = convergence_rates(e_p, ns)
    r_u = convergence_rates(e_u, ns)
    r_d = convergence_rates(e_div, ns)
    rows = [
        {
            "family": family, "variant": variant,
            "r": r, "n": n, "dofs": dofs[i],
            "e_p": e_p[i], "rate_p": r_p[i],
            "e_u": e_u[i], "rate_u": r_u[i],
            "e_div": e_div[i], "rate_div": r_d[i],
        }
        for i, n in enumerate(ns)
    ]
    return ConvergenceReport("mixed", rows)
