"""Exception hierarchy shared by all qgeom modules."""


class QgeomError(Exception):
    """Base class for all qgeom errors."""


class ParseError(QgeomError):
    """Malformed expression source; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownIdentifier(ParseError):
    """Identifier that is neither a declared coordinate nor a known function."""

    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier '{name}'", position)
        self.name = name


class DimensionMismatch(QgeomError):
    """Point length does not match the coordinate count."""


class DegenerateGradient(QgeomError):
    """Constraint gradient too small to define a normal direction."""


class OffSurface(QgeomError):
    """Queried point does not lie on the constraint surface."""


class NoConvergence(QgeomError):
    """Iteration failed to converge; carries iteration count and residual."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class DependentGradients(QgeomError):
    """Constraint gradients are linearly dependent."""


class OddConstraintCount(QgeomError):
    """Second-class analysis needs an even number of constraints."""


class SingularConstraintMatrix(QgeomError):
    """Constraint bracket matrix is numerically singular."""


class FormMismatch(QgeomError):
    """Two supposedly equivalent potential forms disagree beyond tolerance."""


class NotDistanceNormalized(QgeomError):
    """Operation requires a representation with unit gradient at the point."""


class ZeroPosition(QgeomError):
    """Position vector vanishes where a radial direction is required."""


class UnsupportedScheme(QgeomError):
    """Quantization scheme not applicable to this operation."""


class GridTooCoarse(QgeomError):
    """Discretization grid below the minimum supported resolution."""


class DeltaTooLarge(QgeomError):
    """Layer half-width incompatible with the geometry."""


class ChartSingular(QgeomError):
    """Tube coordinates degenerate: 1 + w*k reaches zero inside the layer."""


class FoldOver(QgeomError):
    """Offset surface self-intersects: some 1 + eps*k factor is nonpositive."""
