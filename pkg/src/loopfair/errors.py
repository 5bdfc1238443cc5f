"""Exception hierarchy shared across the toolkit."""


class LoopfairError(Exception):
    """Base class for all toolkit errors."""


class DomainError(LoopfairError, ValueError):
    """An argument is outside the operation's domain."""


class ConfigError(LoopfairError):
    """Configuration file missing, malformed, or out of range."""


class DataError(LoopfairError):
    """Input data failed validation (schema, coverage, cross-checks)."""


class NumericError(LoopfairError):
    """A numerical routine failed (singular Hessian, non-convergence)."""
