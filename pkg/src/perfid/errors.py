"""Exception types shared across the package."""


class PerfidError(Exception):
    """Base class for errors raised by perfid."""


class UnsupportedFormatError(PerfidError, ValueError):
    pass


class SingularMatrixError(PerfidError, ArithmeticError):
    """A linear system is singular to working precision.

    ``condition`` holds the 1-norm condition estimate (``inf`` when exact zero pivots occur).
    """

    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(message)
        self.condition = condition


class AmbiguousOrderError(PerfidError):
    """Two distinct terms compare equal after rounding, so no canonical order exists."""


class GenericityError(PerfidError):
    """Input fails a genericity gate (wrong kernel dimension, wrong rank)."""


class DegenerateInputError(PerfidError):
    """The base-locus computation did not produce the expected simple points."""
