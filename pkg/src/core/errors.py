"""
Error types for the laboratory.

All errors derive from ValueError so callers that only care about
"bad input" can keep catching the builtin.
"""

from typing import Any, List, Optional


class DoslabError(ValueError):
    """Base class for every error raised by src.core."""


class InputError(DoslabError):
    """Malformed or out-of-range input."""


class CircuitParseError(InputError):
    """Circuit text that does not conform to the circuit file format."""

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class PreconditionError(InputError):
    """A stated precondition fails; witnesses holds the offending values."""

    def __init__(self, message: str, witnesses: Optional[List[float]] = None):
        self.witnesses = list(witnesses or [])
        super().__init__(message)


class PromiseViolationError(DoslabError):
    """The gap promise fails where the caller requires it."""

    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class ConsistencyError(DoslabError):
    """An internal cross-check between two computations failed."""
