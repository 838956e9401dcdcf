"""
Exception types for the lung diffusion pipeline.

The CLI maps these onto exit codes: validation problems (shape, config,
file format) exit with 1, numerical failures exit with 2.
"""

from typing import Optional


class LandError(Exception):
    """Base class for all pipeline errors."""


class ShapeError(LandError, ValueError):
    """Raised when tensor shapes do not satisfy an operation's contract."""


class ConfigError(LandError, ValueError):
    """Raised for invalid or mismatched configuration."""


class FormatError(LandError, ValueError):
    """
    Raised when a binary artifact cannot be decoded.

    Attributes:
        offset: Byte offset at which decoding failed (None if not applicable)
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(LandError, ArithmeticError):
    """
    Raised when a computation produces or receives non-finite values.

    Attributes:
        term: Name of the offending loss term or parameter, if known
    """

    def __init__(self, message: str, term: Optional[str] = None):
        super().__init__(message)
        self.term = term


class ConvergenceError(NumericalError):
    """Raised when an iterative routine fails to converge."""
