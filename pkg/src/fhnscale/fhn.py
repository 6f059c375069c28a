"""Reaction terms and parameters of the FitzHugh-Nagumo dynamics."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class FHNParams:
    """Excitability parameters: relaxation speed tau >= 0, offset a, damping b >= 0."""

    tau: float = 0.2
    a: float = 0.1
    b: float = 0.5

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if self.b < 0:
            raise ValueError(f"b must be nonnegative, got {self.b}")


def cubic_reaction(v):
    """Bistable reaction N(v) = v - v^3 driving the membrane potential."""
    return v - v**3


def adaptation_rate(v, w, params: FHNParams):
    """Recovery drift A(v, w) = tau (v + a - b w) of the adaptation variable."""
    return params.tau * (v + params.a - params.b * w)
