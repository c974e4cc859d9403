"""Exception hierarchy shared by all modules."""


class AffineError(Exception):
    """Base class for errors raised by this package."""


class DomainError(AffineError, ValueError):
    """Inputs lie outside the admissible parameter domain."""


class FellerViolation(DomainError):
    """A downward drift shift ``b - alpha/2`` would leave the parameter domain."""


class NumericalError(AffineError, ArithmeticError):
    """Base class for numerical failures."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class NonRealError(NumericalError):
    """An integral that must be real has a large imaginary residual."""


class CoefficientIdentityError(NumericalError):
    """Shift weights failed their sum-to-zero consistency check."""


class UnsupportedError(AffineError, TypeError):
    """The operation is not available for this test function."""


class ResourceError(AffineError, RuntimeError):
    """A simulation exceeded its configured resource cap."""
