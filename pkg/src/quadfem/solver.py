"""Galerkin and hybridized-mixed solvers for the Poisson model problem.

Solves -div(a grad p) = f on a quadrilateral mesh with homogeneous
Dirichlet data, either with the H1-conforming direct serendipity spaces
(continuous Galerkin) or with the direct mixed spaces in hybrid form:
normal-flux continuity is enforced by Lagrange multipliers living in
P_r(e) on interior edges, the cell-local (u, p) saddle blocks are
eliminated by static condensation, and the remaining Schur system on the
multipliers is symmetric positive definite.

Assembly is deterministic: cells are processed in index order (optionally
in parallel under a thread pool capped by the FEM_THREADS environment
variable), and local contributions are merged in cell order with a fixed
local entry order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from numpy.polynomial.legendre import legval

from .errors import NoConvergence, SingularLocalBlock, UnsupportedOrder
from .mixed import MixedElement, edge_reference_coords
from .quadrature import cell_rule, edge_rule
from .serendipity import DSElement, SupplementChoice, build_nodal_basis


def _workers():
    env = os.environ.get("FEM_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _map_cells(fn, items):
    """Apply fn to items, preserving order; threads only if FEM_THREADS > 1."""
    w = _workers()
    if w == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))


def _coefficient_inverse(a, x):
    """Pointwise inverse of the coefficient field a at points x.

    Returns (n,) for scalar fields or (n, 2, 2) for tensor fields; a=None
    means the identity coefficient.
    """
    if a is None:
        return np.ones(x.shape[0])
    vals = np.asarray(a(x), dtype=float)
    if vals.ndim == 1:
        return 1.0 / vals
    return np.linalg.inv(vals)


def _apply_coef(ainv, vecs):
    """a^{-1} applied to a stack of vector samples (m, n, 2)."""
    if ainv.ndim == 1:
        return vecs * ainv[None, :, None]
    return np.einsum("nkl,mnl->mnk", ainv, vecs)


class SparseSystem:
    """Symmetric positive definite sparse system with its DoF bookkeeping.

    ``matrix``/``rhs`` are restricted to the free (non-Dirichlet) DoFs;
    ``free`` maps free-system indices to global DoF ids and ``cell_dofs``
    maps (cell, local index) to global DoF ids.
    """

    def __init__(self, matrix, rhs, free, ndof, cell_dofs, lift=None):
        self.matrix = matrix
        self.rhs = rhs
        self.free = free
        self.ndof = ndof
        self.cell_dofs = cell_dofs
        self.lift = lift if lift is not None else np.zeros(ndof)

    @property
    def size(self):
        return self.rhs.shape[0]

    def expand(self, x_free):
        """Scatter a free-DoF vector into the full DoF vector, adding the
        Dirichlet boundary lift."""
        full = self.lift.copy()
        full[self.free] = x_free
        return full


def galerkin_numbering(mesh, r):
    """Global DoF ids per cell for the degree-r serendipity space.

    Vertices come first, then r-1 interior nodes per mesh edge (ordered
    along the edge from its lower-numbered vertex), then cell-interior
    nodes.  Shared edge DoFs are identified structurally through the mesh
    edge table, honoring each cell's traversal direction.
    """
    nv = len(mesh.vertices)
    ne = len(mesh.edges)
    nc = len(mesh.quads)
    per_edge = r - 1
    n_int = (r - 2) * (r - 3) // 2
    D = 4 + 4 * per_edge + n_int
    cell_dofs = np.empty((nc, D), dtype=np.int64)
    for c in range(nc):
        dofs = list(mesh.cells[c])
        for slot, eid in enumerate(mesh.cell_edges[c]):
            base = nv + eid * per_edge
            if mesh.cell_edge_sign[c, slot] > 0:
                dofs.extend(base + k for k in range(per_edge))
            else:
                dofs.extend(base + per_edge - 1 - k for k in range(per_edge))
        base = nv + ne * per_edge + c * n_int
        dofs.extend(range(base, base + n_int))
        cell_dofs[c] = dofs
    return cell_dofs, nv + ne * per_edge + nc * n_int


def _dirichlet_mask(mesh, r, ndof):
    nv = len(mesh.vertices)
    per_edge = r - 1
    mask = np.zeros(ndof, dtype=bool)
    mask[:nv] = mesh.boundary_vertex
    for eid in np.flatnonzero(mesh.boundary_edge):
        mask[nv + eid * per_edge: nv + (eid + 1) * per_edge] = True
    return mask


def build_elements(mesh, r, choice=None):
    """Direct serendipity elements (with nodal bases) for every cell."""
    if choice is None:
        choice = SupplementChoice.geometric()

    def make(quad):
        el = DSElement(quad, r, choice)
        build_nodal_basis(el)
        return el

    return _map_cells(make, mesh.quads)


def _dirichlet_lift(mesh, r, ndof, mask, g):
    """Nodal interpolation of the Dirichlet data g on boundary DoFs."""
    lift = np.zeros(ndof)
    if g is None:
        return lift
    nv = len(mesh.vertices)
    bv = np.flatnonzero(mesh.boundary_vertex)
    lift[bv] = np.asarray(g(mesh.vertices[bv]), dtype=float)
    per_edge = r - 1
    t = -1.0 + 2.0 * np.arange(1, r) / r
    for eid in np.flatnonzero(mesh.boundary_edge):
        va, vb = mesh.edges[eid].v
        pts = mesh.vertices[va] + 0.5 * (t + 1.0)[:, None] * (
            mesh.vertices[vb] - mesh.vertices[va]
        )
        lift[nv + eid * per_edge: nv + (eid + 1) * per_edge] = np.asarray(
            g(pts), dtype=float
        )
    return lift


def assemble_galerkin(mesh, r, choice=None, f=None, a=None, g=None,
                      elements=None):
    """Assemble stiffness (a grad phi_i, grad phi_j) and load (f, phi_i).

    Returns the SparseSystem on the free DoFs after Dirichlet elimination
    (data g interpolated at boundary nodes and moved to the right-hand
    side; g=None means the homogeneous problem), together with the element
    list (one per cell, reused for error evaluation).
    """
    if r < 2:
        raise UnsupportedOrder("the H1 serendipity solver needs r >= 2")
    if elements is None:
        elements = build_elements(mesh, r, choice)
    cell_dofs, ndof = galerkin_numbering(mesh, r)
    k = r + 5

    def local(c):
        el = elements[c]
        x, w, xh = cell_rule(el.quad, k)
        G = el.eval_basis_grad(x, xh)
        ainv = _coefficient_inverse(a, x)
        if ainv.ndim == 1:
            aw = w / ainv  # scalar a: weight by a itself
            Ke = np.einsum("ink,jnk->ij", G * aw[None, :, None], G)
        else:
            aG = np.einsum("nkl,jnl->jnk", np.linalg.inv(ainv), G)
            Ke = np.einsum("ink,jnk->ij", G * w[None, :, None], aG)
        Ke = 0.5 * (Ke + Ke.T)
        if f is None:
            Fe = np.zeros(el.dim)
        else:
            V = el.eval_basis(x, xh)
            Fe = V @ (w * np.asarray(f(x), dtype=float))
        return Ke, Fe

    locals_ = _map_cells(local, range(len(mesh.quads)))

    D = cell_dofs.shape[1]
    rows = np.repeat(cell_dofs, D, axis=1).ravel()
    cols = np.tile(cell_dofs, (1, D)).ravel()
    vals = np.concatenate([Ke.ravel() for Ke, _ in locals_])
    K = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()
    F = np.zeros(ndof)
    for c, (_, Fe) in enumerate(locals_):
        np.add.at(F, cell_dofs[c], Fe)

    mask = _dirichlet_mask(mesh, r, ndof)
    free = np.flatnonzero(~mask)
    lift = _dirichlet_lift(mesh, r, ndof, mask, g)
    rhs = F[free] - (K @ lift)[free]
    Kff = K[free][:, free].tocsr()
    system = SparseSystem(Kff, rhs, free, ndof, cell_dofs, lift)
    return system, elements


def solve_spd(system, rel_tol=1e-12):
    """Jacobi-preconditioned conjugate gradients on an SPD system.

    Returns (solution, iterations).  Raises NoConvergence -- carrying the
    best iterate in ``.best`` -- if the relative residual has not reached
    rel_tol within 20 sqrt(N) iterations.
    """
    K, b = system.matrix, system.rhs
    n = b.shape[0]
    if n == 0:
        return np.zeros(0), 0
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    dinv = 1.0 / K.diagonal()
    x = np.zeros(n)
    resid = b.copy()
    z = dinv * resid
    p = z.copy()
    rz = resid @ z
    best_x, best_res = x.copy(), 1.0
    max_iter = max(1, int(np.ceil(20.0 * np.sqrt(n))))
    for it in range(1, max_iter + 1):
        Kp = K @ p
        alpha = rz / (p @ Kp)
        x += alpha * p
        resid -= alpha * Kp
        rel = np.linalg.norm(resid) / bnorm
        if rel < best_res:
            best_res, best_x = rel, x.copy()
        if rel <= rel_tol:
            return x, it
        z = dinv * resid
        rz_new = resid @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    err = NoConvergence(
        f"PCG stalled at relative residual {best_res:.3e} "
        f"after {max_iter} iterations"
    )
    err.best = best_x
    err.residual = best_res
    raise err


class GalerkinSolution:
    """Continuous solution field: per-cell evaluation of p_h and grad p_h."""

    def __init__(self, mesh, r, elements, system, x_free):
        self.mesh = mesh
        self.r = r
        self.elements = elements
        self.system = system
        self.coeffs = system.expand(x_free)[system.cell_dofs]

    def cell_values(self, c, x, xhat=None):
        el = self.elements[c]
        return self.coeffs[c] @ el.eval_basis(x, xhat)

    def cell_gradients(self, c, x, xhat=None):
        el = self.elements[c]
        return np.einsum("j,jnk->nk", self.coeffs[c], el.eval_basis_grad(x, xhat))


def solve_galerkin(mesh, r, f, choice=None, a=None, g=None, rel_tol=1e-12):
    """Assemble and solve; returns (GalerkinSolution, iteration count)."""
    system, elements = assemble_galerkin(mesh, r, choice, f, a, g)
    x, iters = solve_spd(system, rel_tol)
    return GalerkinSolution(mesh, r, elements, system, x), iters


# -- hybridized mixed method ------------------------------------------------


class HybridSystem:
    """Static condensation of the hybrid mixed method.

    Per cell the saddle block  M = [[A, -B^T], [-B, 0]]  couples the
    vector unknowns (A = (a^{-1} psi_j, psi_i), B = (div psi_j, w_i))
    and the multiplier coupling C[m, j] = int_e (psi_j . nu_E) mu_m uses
    Legendre multipliers in the global edge orientation.  Eliminating
    (u, p) leaves  S lambda = g  on interior-edge multipliers with
    S = sum_E C (M^{-1})_uu C^T symmetric positive definite.
    """

    def __init__(self, mesh, r, variant, elements, lus, couplings, loads,
                 bc_data, matrix, rhs, edge_rank, nm):
        self.mesh = mesh
        self.r = r
        self.variant = variant
        self.elements = elements
        self.lus = lus
        self.couplings = couplings
        self.loads = loads
        self.bc_data = bc_data
        self.matrix = matrix
        self.rhs = rhs
        self.edge_rank = edge_rank
        self.nm = nm

    @property
    def size(self):
        return self.rhs.shape[0]

    def cell_multipliers(self, c, lam):
        """Multiplier values seen by cell c (prescribed data on boundary)."""
        nm = self.nm
        out = self.bc_data[c].copy()
        for slot in range(4):
            rank = self.edge_rank[self.mesh.cell_edges[c][slot]]
            if rank >= 0:
                out[slot * nm:(slot + 1) * nm] = lam[rank * nm:(rank + 1) * nm]
        return out


def assemble_hybrid_mixed(mesh, r, variant="reduced", f=None, choice=None,
                          a=None, g=None, elements=None):
    """Assemble the condensed multiplier system of the hybrid mixed method.

    Dirichlet data g (None means homogeneous) fixes the boundary-edge
    multipliers to the L2 projection of g onto P_r(e); only interior-edge
    multipliers remain as unknowns.
    """
    if choice is None:
        choice = SupplementChoice.simple()
    if elements is None:
        elements = _map_cells(
            lambda quad: MixedElement(quad, r, variant, choice), mesh.quads
        )
    nm = r + 1
    edge_rank = np.full(len(mesh.edges), -1, dtype=np.int64)
    interior = np.flatnonzero(~mesh.boundary_edge)
    edge_rank[interior] = np.arange(len(interior))
    n_mult = len(interior) * nm
    k = r + 5

    def local(c):
        el = elements[c]
        quad = el.quad
        du, dw = el.dim, len(el.w_basis)
        x, w, xh = cell_rule(quad, k)
        V = el.eval_basis(x, xh)
        ainv = _coefficient_inverse(a, x)
        A = np.einsum("ink,jnk->ij", V, _apply_coef(ainv, V) * w[None, :, None])
        A = 0.5 * (A + A.T)
        divs = el.eval_basis_div(x, xh)
        Wv = np.vstack([q.val(x) for q in el.w_basis])
        B = (Wv * w[None, :]) @ divs.T
        F = Wv @ (w * np.asarray(f(x), dtype=float)) if f is not None else np.zeros(dw)
        M = np.zeros((du + dw, du + dw))
        M[:du, :du] = A
        M[:du, du:] = -B.T
        M[du:, :du] = -B
        try:
            lu = sla.lu_factor(M)
        except (sla.LinAlgError, ValueError):
            raise SingularLocalBlock(f"cell {c}: saddle block failed to factor")
        udiag = np.abs(np.diag(lu[0]))
        if udiag.min() <= 1e-13 * max(udiag.max(), 1.0):
            raise SingularLocalBlock(f"cell {c}: saddle block is singular")
        C = np.zeros((4 * nm, du))
        bc = np.zeros(4 * nm)
        for slot in range(4):
            xe, we, t = edge_rule(quad, slot + 1, r + 2)
            tg = mesh.cell_edge_sign[c, slot] * t
            flux = el.eval_basis(xe, edge_reference_coords(slot + 1, t)) @ quad.edges[slot].normal
            gb = None
            if g is not None and mesh.boundary_edge[mesh.cell_edges[c][slot]]:
                gb = np.asarray(g(xe), dtype=float)
            for m in range(nm):
                em = np.zeros(m + 1)
                em[m] = 1.0
                pm = legval(tg, em)
                C[slot * nm + m] = flux @ (we * pm)
                if gb is not None:
                    bc[slot * nm + m] = (
                        (2 * m + 1) / quad.edges[slot].length * np.sum(we * pm * gb)
                    )
        rhs0 = np.concatenate([-C.T @ bc, -F])
        U0 = sla.lu_solve(lu, rhs0)[:du]
        Y = sla.lu_solve(lu, np.vstack([C.T, np.zeros((dw, 4 * nm))]))[:du]
        return lu, C, F, bc, C @ Y, C @ U0

    locals_ = _map_cells(local, range(len(mesh.quads)))

    rows, cols, vals = [], [], []
    rhs = np.zeros(n_mult)
    lus, couplings, loads, bc_data = [], [], [], []
    for c, (lu, C, F, bc, SE, gE) in enumerate(locals_):
        lus.append(lu)
        couplings.append(C)
        loads.append(F)
        bc_data.append(bc)
        gids = np.full(4 * nm, -1, dtype=np.int64)
        for slot in range(4):
            rank = edge_rank[mesh.cell_edges[c][slot]]
            if rank >= 0:
                gids[slot * nm:(slot + 1) * nm] = rank * nm + np.arange(nm)
        idx = np.flatnonzero(gids >= 0)
        rows.append(np.repeat(gids[idx], idx.size))
        cols.append(np.tile(gids[idx], idx.size))
        vals.append(SE[np.ix_(idx, idx)].ravel())
        np.add.at(rhs, gids[idx], gE[idx])
    S = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_mult, n_mult),
    ).tocsr()
    return HybridSystem(mesh, r, variant, elements, lus, couplings, loads,
                        bc_data, S, rhs, edge_rank, nm)


def recover_fields(hybrid, lam):
    """Cell-by-cell back substitution of the condensed unknowns.

    Returns (u, p): arrays of per-cell coefficient vectors of the vector
    variable (in the mixed DoF-dual basis) and the scalar variable (in the
    scaled monomial basis of P_s).
    """
    nc = len(hybrid.mesh.quads)
    du = hybrid.elements[0].dim
    dw = len(hybrid.elements[0].w_basis)
    u = np.empty((nc, du))
    p = np.empty((nc, dw))
    for c in range(nc):
        lam_c = hybrid.cell_multipliers(c, lam)
        rhs = np.concatenate([-hybrid.couplings[c].T @ lam_c, -hybrid.loads[c]])
        y = sla.lu_solve(hybrid.lus[c], rhs)
        u[c] = y[:du]
        p[c] = y[du:]
    return u, p


class HybridSolution:
    """Mixed solution fields u_h (H(div)) and p_h (discontinuous P_s)."""

    def __init__(self, mesh, r, variant, elements, u, p, lam):
        self.mesh = mesh
        self.r = r
        self.variant = variant
        self.elements = elements
        self.u = u
        self.p = p
        self.lam = lam

    def cell_scalar(self, c, x):
        el = self.elements[c]
        return self.p[c] @ np.vstack([q.val(np.atleast_2d(x)) for q in el.w_basis])

    def cell_vector(self, c, x, xhat=None):
        return np.einsum("j,jnk->nk", self.u[c], self.elements[c].eval_basis(x, xhat))

    def cell_divergence(self, c, x, xhat=None):
        return self.u[c] @ self.elements[c].eval_basis_div(x, xhat)


def solve_hybrid_mixed(mesh, r, f, variant="reduced", choice=None, a=None,
                       g=None, rel_tol=1e-12):
    """Assemble, condense, solve, and recover; returns (solution, iters)."""
    hybrid = assemble_hybrid_mixed(mesh, r, variant, f, choice, a, g)
    lam, iters = solve_spd(hybrid, rel_tol)
    u, p = recover_fields(hybrid, lam)
    return HybridSolution(mesh, r, variant, hybrid.elements, u, p, lam), iters
