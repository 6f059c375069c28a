"""Limit reaction-diffusion system and the adaptation-density transport.

On cells carrying mass the mean fields obey

    dV/dt = L_rho0(V) + N(V) - W,      dW/dt = tau (V + a - b W),

with the nonlocal diffusion L; off the support of rho0 both stay pinned at
zero.  The adaptation density over (x, w) is transported along the exact
per-cell characteristics dw/dt = tau (V(t, x) + a - b w) by weighted
particles; the analytic density amplitude exp(tau b t) is tracked as a single
scalar since it cancels in every moment ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowupError, TrajectoryGapError
from .fhn import FHNParams, adaptation_rate, cubic_reaction
from .grid import MASS_FLOOR, DiscreteKernel, SpatialGrid, nonlocal_operator


@dataclass
class MacroFields:
    """Per-cell (rho0, V, W); rho0 never changes in time."""

    rho0: np.ndarray
    V: np.ndarray
    W: np.ndarray
    params: FHNParams

    def __post_init__(self):
        self.rho0 = np.asarray(self.rho0, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        if not (self.rho0.shape == self.V.shape == self.W.shape):
            raise ValueError("rho0, V and W must share one shape")

    @property
    def support(self) -> np.ndarray:
        return self.rho0 > MASS_FLOOR


@dataclass
class AdaptationCloud:
    """Weighted particles (cell, w) carrying the adaptation density, plus the
    analytic amplitude factor and the current time."""

    cell: np.ndarray
    w: np.ndarray
    weight: np.ndarray
    amplitude_factor: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        self.cell = np.asarray(self.cell, dtype=np.int64)
        self.w = np.asarray(self.w, dtype=float)
        self.weight = np.asarray(self.weight, dtype=float)
        n = self.cell.shape[0]
        if not (self.w.shape == self.weight.shape == (n,)):
            raise ValueError("cell, w and weight must be equally long 1-d arrays")
        if n and float(self.weight.min()) <= 0.0:
            raise ValueError("particle weights must be positive")

    def total_mass(self) -> float:
        return float(self.weight.sum())


@dataclass
class FieldTrajectory:
    """Per-cell field stored at increasing times, linearly interpolated."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.values.shape[0] != self.times.shape[0]:
            raise ValueError("values must carry one row per stored time")
        if self.times.size and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def sample(self, t: float) -> np.ndarray:
        times = self.times
        tol = 1e-9 * max(1.0, abs(float(times[-1])))
        if t < times[0] - tol or t > times[-1] + tol:
            raise TrajectoryGapError(
                f"time {t!r} outside the stored range [{times[0]!r}, {times[-1]!r}]"
            )
        k = int(np.searchsorted(times, t, side="right")) - 1
        k = min(max(k, 0), times.size - 2) if times.size > 1 else 0
        if times.size == 1:
            return self.values[0]
        t0, t1 = times[k], times[k + 1]
        if t <= t0:
            return self.values[k]
        if t >= t1:
            return self.values[k + 1]
        lam = (t - t0) / (t1 - t0)
        return (1.0 - lam) * self.values[k] + lam * self.values[k + 1]


def macro_rhs(fields: MacroFields, kernel: DiscreteKernel):
    """Time derivatives (dV, dW), forced to zero on cells without mass."""
    mask = fields.support
    dV = nonlocal_operator(kernel, fields.rho0, fields.V) + cubic_reaction(fields.V) - fields.W
    dW = adaptation_rate(fields.V, fields.W, fields.params)
    dV = np.where(mask, dV, 0.0)
    dW = np.where(mask, dW, 0.0)
    return dV, dW


def macro_step(fields: MacroFields, kernel: DiscreteKernel, dt: float) -> MacroFields:
    """One RK4 step of the limit system; rho0 is carried over unchanged."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")

    def f(V, W):
        probe = MacroFields(rho0=fields.rho0, V=V, W=W, params=fields.params)
        return macro_rhs(probe, kernel)

    V0, W0 = fields.V, fields.W
    with np.errstate(over="ignore", invalid="ignore"):
        k1v, k1w = f(V0, W0)
        k2v, k2w = f(V0 + 0.5 * dt * k1v, W0 + 0.5 * dt * k1w)
        k3v, k3w = f(V0 + 0.5 * dt * k2v, W0 + 0.5 * dt * k2w)
        k4v, k4w = f(V0 + dt * k3v, W0 + dt * k3w)
        V1 = V0 + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        W1 = W0 + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    if not (np.all(np.isfinite(V1)) and np.all(np.isfinite(W1))):
        bad = ~np.isfinite(V1) | ~np.isfinite(W1)
        first = int(np.argmax(bad))
        raise BlowupError(f"limit-system step blew up at cell {first}", index=first)
    return MacroFields(rho0=fields.rho0, V=V1, W=W1, params=fields.params)


def advect_F(
    cloud: AdaptationCloud,
    V_trajectory: FieldTrajectory,
    dt: float,
    params: FHNParams,
) -> AdaptationCloud:
    """Advance the adaptation particles by dt along dw/dt = tau (V + a - b w).

    V is read from the stored trajectory (linear interpolation between
    nodes); weights are untouched and the amplitude factor picks up the
    analytic exp(tau b dt).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t0 = cloud.t
    cell = cloud.cell

    def drift(w, t):
        V = V_trajectory.sample(t)[cell]
        return adaptation_rate(V, w, params)

    w0 = cloud.w
    k1 = drift(w0, t0)
    k2 = drift(w0 + 0.5 * dt * k1, t0 + 0.5 * dt)
    k3 = drift(w0 + 0.5 * dt * k2, t0 + 0.5 * dt)
    k4 = drift(w0 + dt * k3, t0 + dt)
    w1 = w0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return AdaptationCloud(
        cell=cloud.cell,
        w=w1,
        weight=cloud.weight,
        amplitude_factor=cloud.amplitude_factor * math.exp(params.tau * params.b * dt),
        t=t0 + dt,
    )


def consistency_W(cloud: AdaptationCloud, fields: MacroFields, grid: SpatialGrid) -> np.ndarray:
    """Per-cell |W - weighted mean w of the adaptation particles|.

    Both sides solve the same per-cell linear drift, so the residual measures
    only time-discretisation error.  Cells without particles report zero.
    """
    m = grid.n_cells
    mass = np.bincount(cloud.cell, weights=cloud.weight, minlength=m)
    mom = np.bincount(cloud.cell, weights=cloud.weight * cloud.w, minlength=m)
    occupied = mass > 0
    mean_w = np.zeros(m)
    mean_w[occupied] = mom[occupied] / mass[occupied]
    out = np.zeros(m)
    out[occupied] = np.abs(fields.W[occupied] - mean_w[occupied])
    return out


def adaptation_from_cloud(cell, w, weight) -> AdaptationCloud:
    """Adaptation cloud sharing a kinetic cloud's (cell, w, weight) exactly."""
    return AdaptationCloud(cell=cell, w=np.array(w, dtype=float), weight=weight)
