"""Shared exception types.

The CLI maps these onto its exit-code contract: DomainError -> 2,
SizeError -> 3, anything else -> 4.
"""


class DomainError(ValueError):
    """Input violates a documented precondition of an operation."""


class SizeError(RuntimeError):
    """Instance exceeds a hard size cap of an exact algorithm."""

    def __init__(self, message, *, limit=None, actual=None):
        super().__init__(message)
        self.limit = limit
        self.actual = actual


class DegenerateChannelError(DomainError):
    """Channel parameters collapse a construction (e.g. zero alignment step)."""
