"""Exception types shared across the package."""

from __future__ import annotations


class TermVarError(Exception):
    """Base class for all errors raised by termvar."""


class ParseError(TermVarError, ValueError):
    """A dictionary, rules, or mentions file could not be parsed."""

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if lineno is not None:
            where = f"{where}{lineno}: " if where else f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class CapacityError(TermVarError):
    """Candidate generation exceeded a configured limit."""

    def __init__(self, limit: str, value: int):
        self.limit = limit
        self.value = value
        super().__init__(f"capacity exceeded: {limit}={value}")


class ConsistencyError(TermVarError, ValueError):
    """Inputs that must agree with each other do not (e.g. mentions vs corpus)."""
