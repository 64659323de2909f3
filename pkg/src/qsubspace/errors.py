"""Exception taxonomy shared across the package.

Every error raised on purpose derives from QsubspaceError so callers (and the
command line driver) can map failures to stable exit codes:

  1  input/output        (plain OSError, not wrapped)
  2  validation          ParseError, ValidationError
  3  capacity            CapacityError
  4  convergence         ConvergenceError
  5  data/numerical      DataError and subclasses
  6  internal            anything else
"""

from __future__ import annotations


class QsubspaceError(Exception):
    """Base class for all package errors."""


class ParseError(QsubspaceError):
    """Malformed input text. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ValidationError(QsubspaceError):
    """Arguments outside the documented domain."""


class CapacityError(QsubspaceError):
    """Problem size exceeds the desk-scale caps."""


class ConvergenceError(QsubspaceError):
    """Iteration budget exhausted. Carries the best iterate found so far."""

    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class DataError(QsubspaceError):
    """Numerically invalid data: NaN/Inf, broken invariants, empty results."""


class DecompositionError(DataError):
    """Factorization failed (negative pivot in a supposedly PSD matrix)."""

    def __init__(self, message: str, pivot: float | None = None):
        self.pivot = pivot
        super().__init__(message)


class RescalingError(DataError):
    """Spectral window violated: a rescaled moment escaped [-1, 1]."""


class StepError(DataError):
    """A single propagation step failed its acceptance check."""


class EmptySubspaceError(DataError):
    """Thresholding removed every direction of the subspace."""
