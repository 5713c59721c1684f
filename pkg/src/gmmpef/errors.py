"""Exception hierarchy.

Two families: :class:`ValidationError` for bad inputs (CLI exit code 2) and
:class:`NumericalError` for computations that could not be completed (CLI exit
code 3).
"""


class GmmPefError(Exception):
    """Base class for all package errors."""


class ValidationError(GmmPefError, ValueError):
    """Invalid argument or malformed input file."""


class OrderCapError(ValidationError):
    """Requested moment order exceeds the supported cap."""


class NumericalError(GmmPefError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""


class DivergentPartitionError(NumericalError):
    """The unnormalized density is not integrable on its support."""


class QuadratureError(NumericalError):
    """Adaptive quadrature ran out of subdivisions before meeting tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class NotPositiveDefiniteError(NumericalError):
    """A moment (Hankel) matrix failed the positive-definiteness check."""


class NonIntegrableFitError(NumericalError):
    """A fitted natural parameter has a non-negative leading coefficient."""


class ConvergenceError(NumericalError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message, last=None, residual=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


class EnvelopeError(NumericalError):
    """Rejection sampling envelope is invalid or too loose."""
