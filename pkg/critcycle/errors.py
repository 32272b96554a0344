"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations

from typing import Optional


class CritcycleError(Exception):
    """Base class for every error raised by critcycle."""


class InvalidParameterError(CritcycleError, ValueError):
    """An argument lies outside the range an operation accepts."""


class UnphysicalStateError(InvalidParameterError):
    """A state violates symmetry, positivity or the uncertainty relation."""


class ConfigError(InvalidParameterError):
    """Configuration file or override could not be parsed or validated."""


class NumericalError(CritcycleError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable numbers."""

    def __init__(self, message: str, time: Optional[float] = None) -> None:
        super().__init__(message)
        self.time = time


class ConvergenceError(NumericalError):
    """Fock truncation too small: population leaks into the top levels."""

    def __init__(self, message: str, tail: float, suggested_dim: int, time: Optional[float] = None) -> None:
        super().__init__(message, time=time)
        self.tail = tail
        self.suggested_dim = suggested_dim
