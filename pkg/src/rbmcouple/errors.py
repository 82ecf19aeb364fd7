"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`RBMError`,
and carries the CLI exit code it maps to.
"""


class RBMError(Exception):
    exit_code = 3


class ConfigurationError(RBMError, ValueError):
    """Invalid configuration document, flag, or geometry spec."""

    exit_code = 2


class InvalidCurveError(ConfigurationError):
    """Curve is not regular, not simple, or badly nested."""


class DomainValueError(RBMError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class SingularityError(DomainValueError):
    """Kernel evaluated on its diagonal."""


class InfiniteAreaError(DomainValueError):
    """Area requested for an exterior domain."""


class NumericalFailureError(RBMError):
    """A numerical routine failed to converge.

    ``best`` holds the best candidate found, when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NonConvergenceError(NumericalFailureError):
    """Monte Carlo walkers exceeded their step cap."""


class StepTooLargeError(NumericalFailureError):
    """An increment is too large for a single projection substep."""


class ToleranceNotMetError(NumericalFailureError):
    """Adaptive quadrature stopped before reaching its tolerance."""


class InsufficientDataError(RBMError, ValueError):
    exit_code = 3


class HorizonError(RBMError, ValueError):
    """Requested level was not reached within the simulated horizon."""

    exit_code = 3


class ValidationFailure(RBMError):
    exit_code = 4
