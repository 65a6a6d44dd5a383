"""Exception types shared across the package."""

from __future__ import annotations


class DrlError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(DrlError):
    """A sample or dataset does not match the expected variable dimension."""


class ParseError(DrlError):
    """Constraint text failed to parse.

    Carries 1-based ``line`` and ``column`` for diagnostics.
    """

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class NormalizationError(DrlError):
    """A formula could not be normalized (e.g. CNF clause blowup)."""


class UnboundVariableError(DrlError):
    """A substitution left more than one variable free, or touched a free one."""


class BudgetExceededError(DrlError):
    """Compilation exceeded the configured resolvent budget."""


class UnsatError(DrlError):
    """The constraint set is unsatisfiable; carries the witness clause."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class NumericFailureError(DrlError):
    """Refinement could not find a satisfying value for a coordinate.

    For a satisfiable compiled layer this indicates numerical breakdown,
    not a modelling error; the offending row/variable is reported.
    """

    def __init__(self, message: str, row: int | None = None, var: str | None = None):
        super().__init__(message)
        self.row = row
        self.var = var
