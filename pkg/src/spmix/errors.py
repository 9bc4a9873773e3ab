"""Exception types raised across the package."""


class SpmixError(Exception):
    """Base class for package errors."""


class DomainError(SpmixError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionError(SpmixError, ValueError):
    """Array shapes are inconsistent."""


class BoundaryError(DomainError):
    """A composition has a zero part where log-ratios are required."""


class ParameterError(SpmixError, ValueError):
    """Model or prior parameters are invalid (e.g. a matrix is not SPD)."""


class DataError(SpmixError, ValueError):
    """Input data is malformed or inconsistent with the proximity graph."""


class NumericalError(SpmixError, ArithmeticError):
    """A computation failed numerically (underflow, failed factorization)."""


class SamplerError(SpmixError, RuntimeError):
    """An MCMC update failed; carries the iteration and the update name."""

    def __init__(self, message, iteration=None, update=None):
        super().__init__(message)
        self.iteration = iteration
        self.update = update
