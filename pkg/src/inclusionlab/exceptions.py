"""Exception and warning types raised across the package."""


class InclusionLabError(Exception):
    """Base class for all package errors."""


class InvalidDomainError(InclusionLabError, ValueError):
    pass


class InvalidCoefficientError(InclusionLabError, ValueError):
    pass


class InvalidWeightError(InclusionLabError, ValueError):
    pass


class InvalidSpecError(InclusionLabError, ValueError):
    """Inclusion or problem description violates a standing assumption."""


class InvalidInputError(InclusionLabError, ValueError):
    pass


class ResolutionError(InclusionLabError, ValueError):
    """The inclusion is too small to be resolved by the mesh."""


class SingularOperatorError(InclusionLabError, ArithmeticError):
    pass


class NumericalError(InclusionLabError, ArithmeticError):
    pass


class OverflowGuardError(InclusionLabError, OverflowError):
    pass


class ConvergenceError(InclusionLabError, RuntimeError):
    """Newton iteration did not converge.

    The ``history`` attribute holds one ``(iteration, residual, step, energy)``
    tuple per completed iteration.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class UnlocatableError(InclusionLabError, ValueError):
    """Averaged measurements are nonpositive, so no center can be inferred."""


class IllConditionedError(InclusionLabError, ArithmeticError):
    pass


class ImplausibleResultWarning(UserWarning):
    pass
