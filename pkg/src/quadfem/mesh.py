"""Conforming quadrilateral meshes of the unit square.

Three generated families share the tensor-grid topology and differ only in
vertex placement:

* ``t1`` -- uniform n x n squares.
* ``t2`` -- congruent trapezoids: every cell has vertical parallel sides of
  lengths 0.75h and 1.25h.  Odd-index interior horizontal grid lines are
  offset by +-0.25h with the sign alternating per column; even lines and the
  domain boundary stay straight (needs n even so the pattern closes).
* ``t3`` -- the t1 grid with every interior vertex displaced by
  (+0.07h, -0.05h) times a checkerboard sign, which leaves no cell with a
  parallel pair of opposite edges (needs n even).

Meshes can also be read from / written to a small text format: first line
``nv ne nc``, then nv vertex lines ``x y``, then nc cell lines
``v0 v1 v2 v3`` (counterclockwise), with ``#`` comments allowed.  Edges are
recomputed on load and the connectivity is checked for conformity.
"""

from __future__ import annotations

import numpy as np

from .errors import BadSubdivision, NonConforming, ParseError
from .geometry import Quad

FAMILIES = ("t1", "t2", "t3")

# local edge slots e1..e4 as pairs of local vertex indices, in the
# orientation used by Quad.edges (parameter -1 at the first vertex)
_LOCAL_EDGES = ((0, 3), (1, 2), (0, 1), (3, 2))


class MeshEdge:
    """An undirected mesh edge with its adjacency.

    ``v`` is the vertex pair with the lower index first; that order also
    fixes the canonical parameterization used for multiplier spaces.
    ``cells`` holds one (boundary) or two (interior) adjacent cell indices
    in increasing order.
    """

    __slots__ = ("v", "cells", "boundary")

    def __init__(self, v, cells):
        self.v = v
        self.cells = tuple(sorted(cells))
        self.boundary = len(cells) == 1

    def __repr__(self):  # pragma: no cover - debugging aid
        kind = "boundary" if self.boundary else "interior"
        return f"MeshEdge({self.v}, cells={self.cells}, {kind})"


class Mesh:
    """Immutable conforming quadrilateral mesh.

    Parameters
    ----------
    vertices : (nv, 2) array
    cells : (nc, 4) int array, counterclockwise vertex indices per cell
    family, n : optional provenance tags for generated meshes
    check_hanging : also scan for vertices lying inside other cells' edges
        (used for meshes from external text, where connectivity may lie)
    """

    def __init__(self, vertices, cells, family=None, n=None, check_hanging=False):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = np.asarray(cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must be an (nv, 2) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != 4:
            raise ValueError("cells must be an (nc, 4) array")
        if self.cells.size and (
            self.cells.min() < 0 or self.cells.max() >= len(self.vertices)
        ):
            raise NonConforming("cell refers to a vertex that does not exist")
        self.family = family
        self.n = n

        # every cell must form a valid convex quad (raises otherwise)
        self.quads = [Quad(self.vertices[c]) for c in self.cells]

        # edge table, keyed by sorted vertex pair, in first-encounter order
        index: dict[tuple[int, int], int] = {}
        adjacency: list[list[int]] = []
        self.cell_edges = np.empty_like(self.cells)
        self.cell_edge_sign = np.empty_like(self.cells)
        for ci, cell in enumerate(self.cells):
            for slot, (la, lb) in enumerate(_LOCAL_EDGES):
                a, b = int(cell[la]), int(cell[lb])
                if a == b:
                    raise NonConforming(f"cell {ci} repeats vertex {a}")
                key = (a, b) if a < b else (b, a)
                ei = index.get(key)
                if ei is None:
                    ei = len(adjacency)
                    index[key] = ei
                    adjacency.append([ci])
                else:
                    if len(adjacency[ei]) == 2:
                        raise NonConforming(
                            f"edge {key} is shared by more than two cells"
                        )
                    adjacency[ei].append(ci)
                self.cell_edges[ci, slot] = ei
                # +1 when the local a->b orientation runs lower->higher index
                self.cell_edge_sign[ci, slot] = 1 if a < b else -1
        self.edges = [MeshEdge(key, adjacency[ei]) for key, ei in index.items()]
        # first-encounter order == index order by construction
        self.edges.sort(key=lambda e: index[e.v])

        self.boundary_edge = np.array([e.boundary for e in self.edges])
        self.boundary_vertex = np.zeros(len(self.vertices), dtype=bool)
        for e in self.edges:
            if e.boundary:
                self.boundary_vertex[list(e.v)] = True

        if len(self.vertices) - len(self.edges) + len(self.cells) != 1:
            raise NonConforming(
                "Euler characteristic is not 1; mesh is not a simply "
                "connected conforming partition"
            )
        if check_hanging:
            self._check_hanging_nodes()

    def _check_hanging_nodes(self):
        """Reject vertices that sit strictly inside some other edge."""
        v = self.vertices
        hmin = min(q.h for q in self.quads)
        tol = 1e-12 * hmin
        for e in self.edges:
            a, b = v[e.v[0]], v[e.v[1]]
            t = b - a
            L2 = t @ t
            rel = v - a
            s = (rel @ t) / L2
            dist = np.abs(rel[:, 0] * t[1] - rel[:, 1] * t[0]) / np.sqrt(L2)
            inside = (dist <= tol) & (s > 1e-9) & (s < 1 - 1e-9)
            inside[list(e.v)] = False
            if inside.any():
                k = int(np.flatnonzero(inside)[0])
                raise NonConforming(
                    f"vertex {k} lies inside edge {e.v} (hanging node)"
                )

    # -- queries --------------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_cells(self):
        return len(self.cells)

    def quality(self):
        """min over cells of rho_E / h_E (the shape-regularity witness)."""
        return min(q.quality for q in self.quads)

    def max_h(self):
        return max(q.h for q in self.quads)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            self.vertices.shape == other.vertices.shape
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.cells, other.cells)
        )

    def __hash__(self):  # noqa: D105 - meshes are compared, not hashed
        return id(self)


def generate_mesh(family, n):
    """Generate one of the unit-square mesh families at subdivision n."""
    fam = str(family).lower()
    if fam not in FAMILIES:
        raise ValueError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")
    n = int(n)
    if n < 1:
        raise BadSubdivision("subdivision count must be >= 1")
    if fam in ("t2", "t3") and n % 2 != 0:
        raise BadSubdivision(f"family {fam} requires an even subdivision count")

    h = 1.0 / n
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    x = ii * h
    y = jj * h

    if fam == "t2":
        # odd interior horizontal lines shift by 0.25h, sign alternating
        # per column; every cell then has vertical sides 0.75h and 1.25h
        odd = (jj % 2 == 1) & (jj > 0) & (jj < n)
        y = y + np.where(odd, 0.25 * h * (-1.0) ** ii, 0.0)
    elif fam == "t3":
        interior = (ii > 0) & (ii < n) & (jj > 0) & (jj < n)
        sign = (-1.0) ** (ii + jj)
        x = x + np.where(interior, 0.07 * h * sign, 0.0)
        y = y + np.where(interior, -0.05 * h * sign, 0.0)

    def vid(i, j):
        return i * (n + 1) + j

    vertices = np.column_stack([x.ravel(), y.ravel()])
    cells = np.empty((n * n, 4), dtype=np.int64)
    k = 0
    for j in range(n):  # row-major cell order, bottom row first
        for i in range(n):
            cells[k] = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
            k += 1
    return Mesh(vertices, cells, family=fam, n=n)


def save_mesh(mesh):
    """Serialize a mesh to the text format (exact float round trip)."""
    lines = [f"{mesh.num_vertices} {mesh.num_edges} {mesh.num_cells}"]
    for vx, vy in mesh.vertices:
        lines.append(f"{float(vx)!r} {float(vy)!r}")
    for c in mesh.cells:
        lines.append(" ".join(str(int(v)) for v in c))
    return "\n".join(lines) + "\n"


def load_mesh(text):
    """Parse the mesh text format; validates conformity including hanging nodes."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            records.append((lineno, line.split()))

    if not records:
        raise ParseError("empty mesh file")
    lineno, header = records[0]
    if len(header) != 3:
        raise ParseError("header must be 'nv ne nc'", line=lineno)
    try:
        nv, ne, nc = (int(t) for t in header)
    except ValueError:
        raise ParseError("header must contain three integers", line=lineno) from None
    if nv < 4 or nc < 1 or ne < 4:
        raise ParseError("mesh must have at least one cell", line=lineno)
    if len(records) != 1 + nv + nc:
        raise ParseError(
            f"expected {1 + nv + nc} records (header + {nv} vertices + {nc} cells), "
            f"found {len(records)}",
            line=records[-1][0],
        )

    vertices = np.empty((nv, 2))
    for k in range(nv):
        lineno, toks = records[1 + k]
        if len(toks) != 2:
            raise ParseError("vertex line must be 'x y'", line=lineno)
        try:
            vertices[k] = [float(toks[0]), float(toks[1])]
        except ValueError:
            raise ParseError("bad vertex coordinate", line=lineno) from None

    cells = np.empty((nc, 4), dtype=np.int64)
    for k in range(nc):
        lineno, toks = records[1 + nv + k]
        if len(toks) != 4:
            raise ParseError("cell line must have exactly four vertex indices", line=lineno)
        try:
            cells[k] = [int(t) for t in toks]
        except ValueError:
            raise ParseError("bad vertex index", line=lineno) from None
        if (cells[k] < 0).any() or (cells[k] >= nv).any():
            raise ParseError("vertex index out of range", line=lineno)

    mesh = Mesh(vertices, cells, check_hanging=True)
    if mesh.num_edges != ne:
        raise NonConforming(
            f"header announces {ne} edges but connectivity yields {mesh.num_edges}"
        )
    return mesh
