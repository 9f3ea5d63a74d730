"""Exception hierarchy shared by all acnum modules."""

from __future__ import annotations


class AcnumError(Exception):
    """Base class for every error raised by acnum."""


class CircuitError(AcnumError, ValueError):
    """A circuit is structurally invalid (forward reference, bad opcode, ...)."""


class ParseError(CircuitError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class BasisError(CircuitError):
    """An opcode is not admissible in the basis required by an operation."""


class PreconditionError(AcnumError, ValueError):
    pass


class PromiseViolation(AcnumError):
    """An input circuit has an undefined value (division by zero)."""

    def __init__(self, message: str, gate: int | None = None):
        self.gate = gate
        super().__init__(message)


class SieveBudgetError(AcnumError):
    pass


class GenerationError(AcnumError):
    pass


class InternalError(AcnumError, AssertionError):
    """An invariant that the algorithms guarantee was breached."""
