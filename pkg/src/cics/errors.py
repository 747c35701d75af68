"""Exception types shared across the package."""


class CicsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CicsError, ValueError):
    """Input is well-formed but outside the domain of an operation."""


class CapExceeded(CicsError):
    """An enumeration or state space is larger than the configured cap."""


class ParseError(CicsError, ValueError):
    """An instance file could not be parsed."""
