"""Exception hierarchy.

Every error carries the process exit code the command-line front end maps it
to: 2 for domain and precondition violations, 3 for numerical failures.
"""


class StaError(Exception):
    exit_code = 3


class DomainError(StaError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class DegenerateSpectrumError(DomainError):
    """Gaussian coefficients whose spectrum cannot be written as u**n (1 - u)."""


class SingularDenominatorError(DomainError):
    """A + C <= 0, so the state is not normalizable."""


class PreconditionError(DomainError):
    """A schedule cannot be realized by the requested method (e.g. gamma < 0)."""


class NumericalError(StaError, ArithmeticError):
    exit_code = 3


class IntegrationError(NumericalError):
    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} (t = {time:.17g})"
        super().__init__(message)
        self.time = time


class TruncationError(NumericalError):
    """A truncated series or basis did not reach the requested tolerance."""
