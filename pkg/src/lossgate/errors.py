"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration, command-line input, or impossible request."""


class DomainError(ValueError):
    """An operation was called with inputs outside its documented domain."""


class NumericError(ArithmeticError):
    """A numeric computation degenerated (non-finite values, zero norms)."""
