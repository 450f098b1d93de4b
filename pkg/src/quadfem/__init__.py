"""quadfem: direct serendipity and direct mixed finite elements on quads.

Shape functions are defined directly on each physical convex
quadrilateral — the full polynomial space P_r plus exactly two supplement
functions — so optimal approximation orders survive mesh distortion.  The
package provides the scalar (H1-conforming) and vector (H(div)-conforming)
element families, conforming mesh generation on the unit square, Galerkin
and hybridized-mixed Poisson solvers, and the error/rate/audit tooling
around them, with a CLI front end (``quadfem``).
"""

from .analysis import (
    AuditCheck,
    AuditReport,
    ConvergenceReport,
    convergence_rates,
    derham_audit,
    dof_count,
    error_norms,
    galerkin_error_norms,
    galerkin_report,
    mixed_error_norms,
    mixed_report,
)
from .errors import QuadFemError
from .geometry import BilinearMap, Edge, Quad, random_convex_quad, unit_square
from .mesh import FAMILIES, Mesh, generate_mesh, load_mesh, save_mesh
from .mixed import (
    MIXED_VARIANTS,
    MixedElement,
    build_mixed_element,
    eval_vector_basis,
    project_mixed,
    project_scalar,
)
from .quadrature import cell_rule, edge_rule, gauss_1d, integrate_cell, integrate_edge
from .report import plot_convergence
from .serendipity import (
    DSElement,
    SupplementChoice,
    build_nodal_basis,
    explicit_basis,
    interpolate,
    nodal_points,
)
from .solver import (
    GalerkinSolution,
    HybridSolution,
    assemble_galerkin,
    assemble_hybrid_mixed,
    galerkin_numbering,
    recover_fields,
    solve_galerkin,
    solve_hybrid_mixed,
    solve_spd,
)

__version__ = "0.1.0"

__all__ = [
    "AuditCheck",
    "AuditReport",
    "BilinearMap",
    "ConvergenceReport",
    "DSElement",
    "Edge",
    "FAMILIES",
    "GalerkinSolution",
    "HybridSolution",
    "Mesh",
    "MIXED_VARIANTS",
    "MixedElement",
    "Quad",
    "QuadFemError",
    "SupplementChoice",
    "assemble_galerkin",
    "assemble_hybrid_mixed",
    "build_mixed_element",
    "build_nodal_basis",
    "cell_rule",
    "convergence_rates",
    "derham_audit",
    "dof_count",
    "edge_rule",
    "error_norms",
    "eval_vector_basis",
    "explicit_basis",
    "galerkin_error_norms",
    "galerkin_numbering",
    "galerkin_report",
    "gauss_1d",
    "generate_mesh",
    "integrate_cell",
    "integrate_edge",
    "interpolate",
    "load_mesh",
    "mixed_error_norms",
    "mixed_report",
    "nodal_points",
    "plot_convergence",
    "project_mixed",
    "project_scalar",
    "random_convex_quad",
    "recover_fields",
    "save_mesh",
    "solve_galerkin",
    "solve_hybrid_mixed",
    "solve_spd",
    "unit_square",
]
