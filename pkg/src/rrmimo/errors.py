"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleSupportError(ValueError):
    """No support of any admissible size reaches the requested energy fraction."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
