"""Exception types shared across the package."""

from __future__ import annotations


class CrowdTuneError(Exception):
    """Base class for all package-specific errors."""


class InsufficientBudgetError(CrowdTuneError):
    """The budget cannot pay the minimum one unit per repetition."""

    def __init__(self, message: str, *, budget: int | None = None, required: int | None = None):
        super().__init__(message)
        self.budget = budget
        self.required = required


class InsufficientDataError(CrowdTuneError):
    """A probe observed no arrivals; the caller may extend the probe."""

    def __init__(self, message: str, *, duration: float):
        super().__init__(message)
        self.duration = duration


class InconsistentProbeError(CrowdTuneError):
    """Probe estimates imply a non-positive processing rate."""


class QuadratureError(CrowdTuneError):
    """Numerical integration failed its tail-mass convergence check."""

    def __init__(self, message: str, *, tail_mass: float, upper_bound: float):
        super().__init__(message)
        self.tail_mass = tail_mass
        self.upper_bound = upper_bound


class StateSpaceError(CrowdTuneError):
    """An exhaustive search refused an instance that is too large."""

    def __init__(self, message: str, *, states: int):
        super().__init__(message)
        self.states = states


class ConfigError(CrowdTuneError):
    """A config or data file is malformed; carries the offending line."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        parts = [message]
        if line is not None:
            parts.append(f"(line {line})")
        if field is not None:
            parts.append(f"[{field}]")
        super().__init__(" ".join(parts))
        self.line = line
        self.field = field
