"""Command-line driver for convergence studies, audits, and mesh info.

Subcommands:

* ``convergence`` -- solve -div(grad p) = f on a unit-square mesh family
  for a list of subdivision counts with the manufactured solution
  p = sin(pi x) sin(pi y), and report errors, observed rates, and DoF
  counts as CSV (optionally with a markdown mirror and a log-log figure).
* ``audit`` -- run the structural property suites: nodal or DoF-dual
  unisolvence over seeded random convex quadrilaterals, the de Rham
  checks, and inter-element continuity.  Exits nonzero on any failure.
* ``mesh-info`` -- entity counts and shape-regularity of a mesh family,
  with optional export to the mesh text format.

Exit codes: 0 success, 1 usage error, 2 numerical failure.  The solver's
assembly thread count is capped by the FEM_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analysis
from .errors import QuadFemError
from .geometry import Quad, random_convex_quad, unit_square
from .mesh import FAMILIES, generate_mesh, save_mesh
from .mixed import MixedElement
from .report import plot_convergence
from .solver import solve_galerkin, solve_hybrid_mixed

ELEMENTS = ("ds", "ds-map", "mixed-full", "mixed-red")

_PI = np.pi


def exact_p(x):
    return np.sin(_PI * x[:, 0]) * np.sin(_PI * x[:, 1])


def exact_grad(x):
    return _PI * np.column_stack(
        [
            np.cos(_PI * x[:, 0]) * np.sin(_PI * x[:, 1]),
            np.sin(_PI * x[:, 0]) * np.cos(_PI * x[:, 1]),
        ]
    )


def exact_u(x):
    return -exact_grad(x)


def load_f(x):
    return 2.0 * _PI**2 * np.sin(_PI * x[:, 0]) * np.sin(_PI * x[:, 1])


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage failures exit with status 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("subdivision counts must be positive")
    return values


def build_parser():
    parser = _Parser(
        prog="quadfem",
        description="Direct serendipity and direct mixed elements on "
        "quadrilateral meshes: convergence studies, structural audits, "
        "and mesh utilities.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    conv = sub.add_parser("convergence", help="run a convergence study")
    conv.add_argument("--family", choices=FAMILIES, default="t1",
                      help="mesh family (default t1)")
    conv.add_argument("--element", choices=ELEMENTS, default="ds",
                      help="element kind (default ds)")
    conv.add_argument("--supplement", choices=analysis.SUPPLEMENT_NAMES,
                      default=None,
                      help="supplement family (default geometric; "
                      "ds-map forces mapped)")
    conv.add_argument("--r", type=int, default=2, help="polynomial index")
    conv.add_argument("--n", type=_int_list, default=[8, 12, 16, 24],
                      help="comma-separated subdivision counts")
    conv.add_argument("--tol", type=float, default=1e-12,
                      help="relative solver tolerance (default 1e-12)")
    conv.add_argument("--quad-degree", type=int, default=None,
                      help="quadrature degree for error norms (default r+5)")
    conv.add_argument("--format", choices=("csv", "markdown"), default="csv",
                      help="stdout format when --out is not given")
    conv.add_argument("--out", default=None,
                      help="CSV output path; also writes a markdown mirror "
                      "and a log-log figure alongside it")

    audit = sub.add_parser("audit", help="run the structural property suites")
    audit.add_argument("--element", choices=ELEMENTS, default="ds")
    audit.add_argument("--supplement", choices=analysis.SUPPLEMENT_NAMES,
                       default=None)
    audit.add_argument("--r", type=int, default=2)
    audit.add_argument("--samples", type=int, default=200,
                       help="number of random quadrilaterals (default 200)")
    audit.add_argument("--seed", type=int, default=42,
                       help="seed for the random quadrilaterals (default 42)")
    audit.add_argument("--fixture", default=None,
                       help="text file of four 'x y' vertex lines to audit "
                       "in place of the built-in cells")

    info = sub.add_parser("mesh-info", help="mesh statistics and export")
    info.add_argument("--family", choices=FAMILIES, default="t1")
    info.add_argument("--n", type=int, default=4)
    info.add_argument("--out", default=None, help="write the mesh text file")

    return parser


def _resolve_supplement(parser, args):
    """Supplement name with the element compatibility rules applied."""
    if args.element == "ds-map":
        if args.supplement not in (None, "mapped"):
            parser.error("--element ds-map requires --supplement mapped")
        return "mapped"
    return args.supplement if args.supplement is not None else "geometric"


def _validate_run(parser, args):
    if args.element in ("ds", "ds-map") and args.r < 2:
        parser.error("serendipity elements need --r >= 2")
    if args.element.startswith("mixed") and args.r < 1:
        parser.error("mixed elements need --r >= 1")
    if getattr(args, "n", None) is not None and args.family in ("t2", "t3"):
        if any(n % 2 for n in args.n):
            parser.error(f"family {args.family} requires even subdivision counts")


def run_convergence(args, supplement):
    choice = analysis.supplement_choice(supplement)
    mixed = args.element.startswith("mixed")
    variant = "full" if args.element == "mixed-full" else "reduced"
    ns, dofs = args.n, []
    errs = ([], [], []) if mixed else ([], [])
    for n in ns:
        mesh = generate_mesh(args.family, n)
        if mixed:
            sol, _ = solve_hybrid_mixed(
                mesh, args.r, load_f, variant=variant, choice=choice,
                rel_tol=args.tol,
            )
            e = analysis.mixed_error_norms(
                sol, exact_p, exact_u, load_f, k=args.quad_degree
            )
            dofs.append(analysis.dof_count(args.r, n, f"mixed-{variant}"))
        else:
            sol, _ = solve_galerkin(
                mesh, args.r, load_f, choice=choice, rel_tol=args.tol
            )
            e = analysis.galerkin_error_norms(
                sol, exact_p, exact_grad, k=args.quad_degree
            )
            dofs.append(analysis.dof_count(args.r, n, "serendipity"))
        for acc, val in zip(errs, e):
            acc.append(val)
    if mixed:
        report = analysis.mixed_report(args.family, variant, args.r, ns, dofs, *errs)
    else:
        report = analysis.galerkin_report(
            args.family, args.element, supplement, args.r, ns, dofs, *errs
        )

    if args.out:
        stem, _ = os.path.splitext(args.out)
        with open(args.out, "w") as fh:
            fh.write(report.to_csv())
        with open(stem + ".md", "w") as fh:
            fh.write(report.to_markdown())
        figure = plot_convergence(report, stem + ".png")
        print(f"wrote {args.out}, {stem}.md, {figure}")
    else:
        sys.stdout.write(
            report.to_csv() if args.format == "csv" else report.to_markdown()
        )
    return 0


def _audit_quads(args):
    """The cells the de Rham audit runs on: fixture, or square + random."""
    if args.fixture:
        vertices = np.loadtxt(args.fixture, dtype=float)
        return [("fixture", Quad(vertices))]
    rng = np.random.default_rng(args.seed)
    quads = [("unit square", unit_square())]
    quads += [(f"random quad {i}", random_convex_quad(rng)) for i in range(2)]
    return quads


def run_audit(args, supplement):
    choice = analysis.supplement_choice(supplement)
    report = analysis.AuditReport([])
    mixed = args.element.startswith("mixed")
    r_mix = args.r if mixed else max(1, args.r - 1)

    try:
        quads = _audit_quads(args)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read fixture: {exc}", file=sys.stderr)
        return 1
    except QuadFemError as exc:
        report.checks.append(
            analysis.AuditCheck(
                f"fixture quad ({type(exc).__name__}: {exc})", np.inf, 0.0
            )
        )
        print(report)
        print("audit FAILED")
        return 2

    if not mixed:
        report.extend(
            analysis.unisolvence_audit(
                args.r, samples=args.samples, seed=args.seed, choices=(supplement,)
            )
        )
        report.checks.append(analysis.reproduction_audit(args.r, choice, seed=args.seed))
        report.checks.append(analysis.continuity_audit(args.r, choice, seed=args.seed))
        report.checks.append(analysis.gradient_audit(args.r, choice, seed=args.seed))
        if supplement == "lemma":
            report.checks.append(analysis.explicit_basis_audit(args.r, seed=args.seed))
    else:
        variant = "full" if args.element == "mixed-full" else "reduced"
        rng = np.random.default_rng(args.seed)
        worst = 0.0
        failure = None
        for _ in range(args.samples):
            quad = random_convex_quad(rng)
            try:
                worst = max(
                    worst,
                    analysis.mixed_unisolvence_residual(
                        MixedElement(quad, args.r, variant, choice)
                    ),
                )
            except QuadFemError as exc:
                failure = exc
                break
        name = f"DoF-dual unisolvence r={args.r} [{variant}] over {args.samples} quads"
        if failure is not None:
            report.checks.append(
                analysis.AuditCheck(f"{name} ({failure})", np.inf, 1e-7)
            )
        else:
            report.checks.append(analysis.AuditCheck(name, worst, 1e-7))

    for label, quad in quads:
        sub = analysis.derham_audit(quad, r_mix, choice)
        for check in sub.checks:
            check.name = f"{label}: {check.name}"
        report.extend(sub)

    print(report)
    if report.passed:
        print("audit passed")
        return 0
    print("audit FAILED")
    return 2


def run_mesh_info(args):
    mesh = generate_mesh(args.family, args.n)
    no_parallel = all(
        not q.edges_parallel(1, 2) and not q.edges_parallel(3, 4)
        for q in mesh.quads
    )
    print(f"family {args.family}, n={args.n}")
    print(f"{mesh.num_vertices} vertices, {mesh.num_edges} edges, {mesh.num_cells} cells")
    print(f"quality {mesh.quality():.4f}")
    print(f"no parallel opposite edges: {str(no_parallel).lower()}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(save_mesh(mesh))
        print(f"mesh written to {args.out}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.cmd == "mesh-info":
            return run_mesh_info(args)
        supplement = _resolve_supplement(parser, args)
        _validate_run(parser, args)
        if args.cmd == "convergence":
            return run_convergence(args, supplement)
        return run_audit(args, supplement)
    except QuadFemError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
