"""Exception hierarchy shared by all modules."""


class FrankDefectError(Exception):
    """Base class for every error raised by this package."""


class InvalidStateError(FrankDefectError, ValueError):
    """A director state violates the unit-length constraint."""


class DomainError(FrankDefectError, ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalError(FrankDefectError, ArithmeticError):
    """A numerical procedure failed to reach its target accuracy.

    ``diagnostics`` carries whatever the failing routine knew at the time.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class QuadratureError(NumericalError):
    """Quadrature partial sums do not settle (integrand not resolved or divergent)."""


class IntegrabilityError(QuadratureError):
    """The energy density is not integrable near the axis or origin."""


class ResolutionError(NumericalError):
    """A discrete reconstruction (unwrapping, degree) is ambiguous at this resolution."""


class IterationError(NumericalError):
    """An iterative minimiser ran out of iterations."""


class PreconditionError(FrankDefectError, ValueError):
    """Inputs do not satisfy a structural precondition of the operation."""


class NotEquivariantError(PreconditionError):
    """Sampled field has an azimuthal component, so it is not O(2)-equivariant."""
