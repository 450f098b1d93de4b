"""Exception types shared across the library."""


class QuadFemError(Exception):
    """Base class for all library-specific errors."""


class NonConvex(QuadFemError):
    """Quadrilateral has a reflex corner (some subtriangle area < 0)."""


class Degenerate(QuadFemError):
    """Quadrilateral collapsed to a triangle, segment or point."""


class NoConvergence(QuadFemError):
    """An iterative process failed to reach its tolerance.

    Carries the best iterate found so far in ``best`` when applicable.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BadSubdivision(QuadFemError):
    """Mesh subdivision count violates a family's parity/positivity rules."""


class ParseError(QuadFemError):
    """Malformed mesh text; carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonConforming(QuadFemError):
    """Mesh connectivity is not a conforming quadrilateral partition."""


class UnsupportedOrder(QuadFemError):
    """Quadrature order outside the supported range."""


class SingularExpansion(QuadFemError):
    """Direction-function expansion system is singular (geometry bug)."""


class SingularDoFMatrix(QuadFemError):
    """Degree-of-freedom matrix is numerically singular (unisolvence failure)."""


class SingularLocalBlock(QuadFemError):
    """A cell-local saddle-point block could not be factorized."""


class NonPositiveError(QuadFemError):
    """Convergence-rate extraction received a non-positive error value."""
