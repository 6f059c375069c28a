"""Coupled FitzHugh-Nagumo neuron network at fixed spatial positions.

Each of the n neurons carries a membrane potential v_i and an adaptation
variable w_i.  Potentials couple through a pairwise connectivity evaluated at
the (time-constant) position differences, with the mean-field 1/n weighting:

    dv_i/dt = N(v_i) - w_i - (1/n) sum_j K(x_i - x_j) (v_i - v_j)
    dw_i/dt = tau (v_i + a - b w_i)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BlowupError
from .fhn import FHNParams, adaptation_rate, cubic_reaction
from .grid import SpatialGrid
from .macro import MacroFields


@dataclass
class NeuronNetworkState:
    """Positions are frozen after construction; only (v, w) evolve."""

    positions: np.ndarray
    v: np.ndarray
    w: np.ndarray
    params: FHNParams

    def __post_init__(self):
        pos = self.positions
        if not (isinstance(pos, np.ndarray) and pos.dtype == float and not pos.flags.writeable):
            pos = np.array(pos, dtype=float)
            if pos.ndim == 1:
                pos = pos[:, None]
            pos.setflags(write=False)
        self.positions = pos
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if pos.shape[0] < 1:
            raise ValueError("the network needs at least one neuron")
        if self.v.shape != (pos.shape[0],) or self.w.shape != (pos.shape[0],):
            raise ValueError("v and w must have one entry per neuron")

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class MollifiedDirac:
    """Finite-width stand-in for a point interaction, as a product of even,
    nonnegative one-dimensional profiles of unit integral."""

    width: float
    profile: str = "triangle"

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"width must be positive, got {self.width}")
        if self.profile not in ("triangle", "gaussian"):
            raise ValueError(f"profile must be 'triangle' or 'gaussian', got {self.profile!r}")
        span = 8.0 * self.width
        x = np.linspace(-span, span, 16001)
        integral = float(np.trapezoid(self._profile_1d(x), x))
        if abs(integral - 1.0) > 1e-6:
            raise ValueError(
                f"mollifier quadrature check failed: integral {integral!r} != 1"
            )

    def _profile_1d(self, x):
        x = np.asarray(x, dtype=float)
        if self.profile == "triangle":
            return np.maximum(0.0, 1.0 - np.abs(x) / self.width) / self.width
        return np.exp(-0.5 * (x / self.width) ** 2) / (self.width * np.sqrt(2.0 * np.pi))

    def __call__(self, disp):
        disp = np.asarray(disp, dtype=float)
        if disp.ndim == 0:
            return self._profile_1d(disp)
        return np.prod(self._profile_1d(disp), axis=-1)


def pairwise_coupling(positions, kernel, chunk: int = 512) -> np.ndarray:
    """Dense (n, n) matrix K[i, j] = kernel(x_i - x_j), built in row chunks."""
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    n = pos.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        disp = pos[start:stop, None, :] - pos[None, :, :]
        out[start:stop] = kernel(disp)
    return out


def _coupling_matrix(state: NeuronNetworkState, kernel) -> np.ndarray:
    if isinstance(kernel, np.ndarray):
        if kernel.shape != (state.n, state.n):
            raise ValueError(
                f"coupling matrix must be ({state.n}, {state.n}), got {kernel.shape}"
            )
        return kernel
    return pairwise_coupling(state.positions, kernel)


def micro_rhs(state: NeuronNetworkState, kernel):
    """Time derivatives (dv, dw); kernel is a callable on displacements or a
    precomputed (n, n) coupling matrix."""
    K = _coupling_matrix(state, kernel)
    coupling = _kernels.coupling_sum(K, state.v)
    dv = cubic_reaction(state.v) - state.w - coupling
    dw = adaptation_rate(state.v, state.w, state.params)
    return dv, dw


def micro_step(state: NeuronNetworkState, kernel, dt: float, rhs=micro_rhs) -> NeuronNetworkState:
    """One classical RK4 step; positions are carried over unchanged."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    K = _coupling_matrix(state, kernel)

    def f(v, w):
        probe = NeuronNetworkState.__new__(NeuronNetworkState)
        probe.positions = state.positions
        probe.v = v
        probe.w = w
        probe.params = state.params
        return rhs(probe, K if not isinstance(kernel, np.ndarray) else kernel)

    v0, w0 = state.v, state.w
    with np.errstate(over="ignore", invalid="ignore"):
        k1v, k1w = f(v0, w0)
        k2v, k2w = f(v0 + 0.5 * dt * k1v, w0 + 0.5 * dt * k1w)
        k3v, k3w = f(v0 + 0.5 * dt * k2v, w0 + 0.5 * dt * k2w)
        k4v, k4w = f(v0 + dt * k3v, w0 + dt * k3w)
        v1 = v0 + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        w1 = w0 + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)

    bad = ~np.isfinite(v1) | ~np.isfinite(w1)
    if np.any(bad):
        first = int(np.argmax(bad))
        raise BlowupError(
            f"network integration blew up at neuron {first} "
            f"(v={v1[first]!r}, w={w1[first]!r}); reduce dt",
            index=first,
        )
    return NeuronNetworkState(positions=state.positions, v=v1, w=w1, params=state.params)


def micro_dt_cap(v) -> float:
    """Step-size cap 0.1 / max(1, max v^2) respecting the cubic reaction's
    local stiffness."""
    vmax = float(np.max(np.abs(v))) if np.size(v) else 0.0
    return 0.1 / max(1.0, vmax * vmax)


def empirical_macro(state: NeuronNetworkState, grid: SpatialGrid) -> MacroFields:
    """Per-cell empirical density and (v, w) averages with neuron weight 1/n.

    Cells without neurons follow the convention V = W = 0.
    """
    cell = grid.cell_index(state.positions)
    counts = np.bincount(cell, minlength=grid.n_cells).astype(float)
    rho = counts / state.n / grid.cell_volume
    sum_v = np.bincount(cell, weights=state.v, minlength=grid.n_cells)
    sum_w = np.bincount(cell, weights=state.w, minlength=grid.n_cells)
    occupied = counts > 0
    V = np.zeros(grid.n_cells)
    W = np.zeros(grid.n_cells)
    V[occupied] = sum_v[occupied] / counts[occupied]
    W[occupied] = sum_w[occupied] / counts[occupied]
    return MacroFields(rho0=rho, V=V, W=W, params=state.params)
