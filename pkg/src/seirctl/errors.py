"""Exception types shared across the package."""

from __future__ import annotations


class SeirctlError(Exception):
    """Base class for seirctl-specific failures."""


class DataFormatError(SeirctlError):
    """Raised when an input data file cannot be parsed or validated."""


class ConfigError(SeirctlError):
    """Raised when a run configuration is malformed or inconsistent."""


class NonFiniteStateError(SeirctlError):
    """Raised when an integration produces NaN or infinite values.

    Carries the first offending time so blowups can be located.
    """

    def __init__(self, time: float, detail: str = ""):
        self.time = time
        msg = f"non-finite value first encountered at t = {time!r}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class InvalidStateError(SeirctlError):
    """Raised when a state violates nonnegativity beyond the allowed undershoot."""
