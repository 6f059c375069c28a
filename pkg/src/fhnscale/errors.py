"""Exception types shared by the solvers and the harness."""

from __future__ import annotations


class ConfigError(ValueError):
    """Scenario configuration is invalid; collects every failing field."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


class KernelResolutionError(ValueError):
    """Connectivity kernel is narrower than one grid cell (under-resolved)."""


class BlowupError(RuntimeError):
    """A trajectory left the finite / safe region during time integration."""

    def __init__(self, message, index=None, time=None):
        self.index = index
        self.time = time
        super().__init__(message)


class TrajectoryGapError(ValueError):
    """A time-interpolated field was queried outside its stored time range."""


class InvariantViolation(RuntimeError):
    """A runtime invariant monitor detected an inconsistency."""
