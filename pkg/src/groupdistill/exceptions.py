"""Exception hierarchy for groupdistill.

Everything raised deliberately by this package derives from
:class:`GroupDistillError`, so callers (notably the CLI) can catch one type.
Errors that signal invalid *input values* also subclass :class:`ValueError`,
and numerical failures subclass :class:`ArithmeticError`, so code written
against the standard hierarchy keeps working.
"""

from __future__ import annotations


class GroupDistillError(Exception):
    """Base class for all groupdistill errors."""


class ParseError(GroupDistillError, ValueError):
    """A text file contained a field that could not be parsed.

    The message names the offending line (1-based, header included).
    """


class SchemaError(GroupDistillError, ValueError):
    """A file's header or row layout does not match the expected schema."""


class FormatError(GroupDistillError, ValueError):
    """A binary file is truncated, oversized, or carries the wrong magic."""


class ValidationError(GroupDistillError, ValueError):
    """An in-memory object violates its invariants (duplicate ids,
    dimension mismatches, out-of-range values, zero-norm vectors...)."""


class MissingClassError(ValidationError):
    """A class label in [0, k) has no elements, so its centroid is undefined."""


class DegenerateClassError(ValidationError):
    """A class centroid has (near-)zero norm, so cosine similarity to it is
    undefined."""


class NearSingularRatioError(GroupDistillError, ArithmeticError):
    """The hardest-negative similarity is too close to zero to divide by."""

    def __init__(self, message: str, denominator: float = 0.0):
        super().__init__(message)
        self.denominator = float(denominator)


class DivergenceError(GroupDistillError, ArithmeticError):
    """Training produced a non-finite loss; carries the 1-based step index."""

    def __init__(self, message: str, step: int = 0):
        super().__init__(message)
        self.step = int(step)


class ProtocolError(GroupDistillError, ValueError):
    """An evaluation protocol references unknown ids or is internally
    inconsistent (e.g. a query class absent from the gallery)."""
