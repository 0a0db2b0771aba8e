"""Exception types shared across the package."""


class ResinError(Exception):
    """Base class for all package errors."""


class ShapeError(ResinError, ValueError):
    """Array dimensions do not match what an operation expects."""


class DomainError(ResinError, ValueError):
    """A value lies outside the domain of an inverse activation."""


class NumericError(ResinError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class ConfigError(ResinError, ValueError):
    """An experiment configuration is invalid."""
