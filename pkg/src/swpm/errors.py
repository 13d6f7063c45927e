"""Exception hierarchy shared by all solver modules."""

from __future__ import annotations


class SWPMError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(SWPMError, ValueError):
    """An argument is outside its admissible range."""


class DegenerateInputError(SWPMError, ValueError):
    """The input has no meaningful result (empty set, zero total weight, ...)."""


class ContractViolation(SWPMError, RuntimeError):
    """An internal precondition between cooperating operations was broken."""


class ImpossibleMomentError(SWPMError, ValueError):
    """A moment combination that no particle set can realise."""


class ConfigError(SWPMError, ValueError):
    """Configuration text could not be parsed or violates an invariant."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
