"""Exception hierarchy shared by every module."""


class HinflandError(Exception):
    """Base class for all package errors."""


class DimensionError(HinflandError, ValueError):
    """Matrix blocks with inconsistent shapes.

    ``block`` names the offending matrix.
    """

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class DomainError(HinflandError, ValueError):
    """Input outside the domain of an operation (unstable loop, singular P12, ...)."""


class NumericalError(HinflandError, ArithmeticError):
    """An iterative routine failed to converge or a factorization broke down."""

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info
