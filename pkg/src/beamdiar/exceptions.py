"""Exception hierarchy.

The CLI maps :class:`DataError` to exit code 2 and :class:`NumericalError`
to exit code 3.
"""


class BeamdiarError(Exception):
    """Base class for all package errors."""


class DataError(BeamdiarError, ValueError):
    """Invalid, malformed or inconsistent input data."""


class FormatError(DataError):
    """A file does not follow its expected layout."""


class UnsupportedFormatError(DataError):
    """A file is well formed but uses an encoding we do not read."""


class DimensionError(DataError):
    """Array shapes or channel counts disagree."""


class BoundsError(DataError):
    """A time interval falls outside the recording."""


class DurationError(DataError):
    """A segment is too short for the requested operation."""


class EmptyInputError(DataError):
    """Not enough samples to produce any output."""


class DegenerateEmbeddingError(DataError):
    """An embedding has zero norm."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"embedding {index} has zero norm")


class NumericalError(BeamdiarError, ArithmeticError):
    """A linear-algebra routine failed or a system is too ill conditioned."""


class ConditioningError(NumericalError):
    """Normal equations are singular; use a positive regularization."""
