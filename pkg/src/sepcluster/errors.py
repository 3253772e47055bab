"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SepClusterError(Exception):
    """Base class. ``part`` is set when the error escaped a pipeline stage."""

    part: str | None = None


class InputError(SepClusterError, ValueError):
    """Invalid arguments: shapes, ranges, non-finite entries, empty clusters."""


class DegenerateLineError(InputError):
    """A line through two coincident points was requested."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


class NumericError(SepClusterError, ArithmeticError):
    """An iterative routine failed to produce a usable result."""


class GenerationError(SepClusterError, RuntimeError):
    """A generator could not certify the requested condition."""


class ConvergenceWarning(UserWarning):
    """An iterative routine hit its iteration cap; the best estimate is returned."""
