"""Particle solver for the phase-space density of the neuron continuum.

The density over (x, v, w) is carried by weighted particles pinned to grid
cells (there is no spatial transport).  Per cell, the potential v feels the
FitzHugh-Nagumo reaction, the adaptation variable w, the smooth lateral
coupling through the discretised kernel, and a strong local interaction that
relaxes v toward the cell mean V at rate rho/eps.  The stiff relaxation has a
closed form once V is frozen, so each step is a Strang composition

    half relaxation  ->  RK4 transport (cell means refreshed per stage)
    ->  half relaxation

that is uniformly stable in eps and conserves mass exactly (weights and cell
assignments never change).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BlowupError
from .fhn import FHNParams, adaptation_rate, cubic_reaction
from .grid import MASS_FLOOR, DiscreteKernel, SpatialGrid, convolve


@dataclass
class ParticleCloud:
    """Weighted particles (cell, v, w, weight); arrays are frozen on creation."""

    cell: np.ndarray
    v: np.ndarray
    w: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        self.cell = np.array(self.cell, dtype=np.int64)
        self.v = np.array(self.v, dtype=float)
        self.w = np.array(self.w, dtype=float)
        self.weight = np.array(self.weight, dtype=float)
        n = self.cell.shape[0]
        if not (self.v.shape == self.w.shape == self.weight.shape == (n,)):
            raise ValueError("cell, v, w and weight must be equally long 1-d arrays")
        if n and float(self.weight.min()) <= 0.0:
            raise ValueError("particle weights must be positive")
        for arr in (self.cell, self.v, self.w, self.weight):
            arr.setflags(write=False)

    @property
    def n_particles(self) -> int:
        return self.cell.shape[0]

    def total_mass(self) -> float:
        return float(self.weight.sum())

    def replace(self, v=None, w=None) -> "ParticleCloud":
        return ParticleCloud(
            cell=self.cell,
            v=self.v if v is None else v,
            w=self.w if w is None else w,
            weight=self.weight,
        )


@dataclass
class CellMoments:
    """Per-cell density rho, first moments j = rho V and q = rho W, and the
    ratios V, W (zero below the mass floor)."""

    rho: np.ndarray
    j: np.ndarray
    q: np.ndarray
    V: np.ndarray
    W: np.ndarray


@dataclass(frozen=True)
class InitialDataSpec:
    """Deterministic tensor-quadrature initial data.

    rho0 must integrate to one.  In each populated cell the (v, w) nodes form
    a particles_per_cell_axis^2 midpoint lattice on the box
    [V0 - spread, V0 + spread] x [W0 - spread, W0 + spread], so the deposited
    cell means reproduce (V0, W0) and the support stays compact.
    """

    rho0: np.ndarray
    V0: np.ndarray
    W0: np.ndarray
    vw_spread: float = 0.25
    particles_per_cell_axis: int = 4
    safety_radius: float = 40.0

    def __post_init__(self):
        object.__setattr__(self, "rho0", np.asarray(self.rho0, dtype=float))
        object.__setattr__(self, "V0", np.asarray(self.V0, dtype=float))
        object.__setattr__(self, "W0", np.asarray(self.W0, dtype=float))
        if self.vw_spread < 0:
            raise ValueError(f"vw_spread must be nonnegative, got {self.vw_spread}")
        if self.particles_per_cell_axis < 1:
            raise ValueError("particles_per_cell_axis must be at least 1")
        if self.safety_radius <= 0:
            raise ValueError("safety_radius must be positive")


def midpoint_nodes(count: int) -> np.ndarray:
    """Midpoint quadrature nodes of the uniform box profile on [-1, 1]."""
    k = np.arange(count)
    return -1.0 + (2.0 * k + 1.0) / count


def deposit_moments(cloud: ParticleCloud, grid: SpatialGrid) -> CellMoments:
    """Accumulate per-cell density and first moments in particle order."""
    vol = grid.cell_volume
    m = grid.n_cells
    rho = _kernels.bin_sums(cloud.cell, cloud.weight, m) / vol
    j = _kernels.bin_sums(cloud.cell, cloud.weight * cloud.v, m) / vol
    q = _kernels.bin_sums(cloud.cell, cloud.weight * cloud.w, m) / vol
    occupied = rho > MASS_FLOOR
    V = np.zeros(m)
    W = np.zeros(m)
    V[occupied] = j[occupied] / rho[occupied]
    W[occupied] = q[occupied] / rho[occupied]
    return CellMoments(rho=rho, j=j, q=q, V=V, W=W)


def sample_initial(spec: InitialDataSpec, grid: SpatialGrid) -> ParticleCloud:
    cloud, _ = initial_state(spec, grid)
    return cloud


def initial_state(spec: InitialDataSpec, grid: SpatialGrid):
    """Build the particle cloud together with its deposited moments.

    Returns (cloud, moments).  The node v (and w) values are nudged so the
    deposited per-cell means land on V0 (W0) to the last bit where
    representable; the initial relative entropy against the deposited means
    is then exactly zero for every eps.
    """
    rho0 = spec.rho0
    if rho0.shape != (grid.n_cells,):
        raise ValueError(f"rho0 must have {grid.n_cells} entries, got {rho0.shape}")
    vol = grid.cell_volume
    mass = float(rho0.sum() * vol)
    if abs(mass - 1.0) > 1e-10:
        raise ValueError(f"rho0 must integrate to 1, got {mass!r}")
    if float(rho0.min()) < 0:
        raise ValueError("rho0 must be nonnegative")

    p = 1 if spec.vw_spread == 0.0 else int(spec.particles_per_cell_axis)
    xi = midpoint_nodes(p)
    populated = np.flatnonzero(rho0 > 0.0)
    n_cells = populated.size
    if n_cells == 0:
        raise ValueError("rho0 has no populated cells")

    cell = np.repeat(populated, p * p)
    v_off = spec.vw_spread * np.tile(np.repeat(xi, p), n_cells)
    w_off = spec.vw_spread * np.tile(np.tile(xi, p), n_cells)
    v = np.repeat(spec.V0[populated], p * p) + v_off
    w = np.repeat(spec.W0[populated], p * p) + w_off
    weight = np.repeat(rho0[populated] * vol, p * p) / (p * p)
    weight = weight / weight.sum()

    vmax = float(np.max(np.abs(spec.V0[populated]))) + spec.vw_spread
    wmax = float(np.max(np.abs(spec.W0[populated]))) + spec.vw_spread
    if max(vmax, wmax) > spec.safety_radius:
        raise ValueError(
            f"initial (v, w) support radius {max(vmax, wmax):g} exceeds the "
            f"safety radius {spec.safety_radius:g}"
        )

    # nudge node values until the deposited means land on the targets
    cloud = ParticleCloud(cell=cell, v=v, w=w, weight=weight)
    for _ in range(4):
        mom = deposit_moments(cloud, grid)
        dv = mom.V[cloud.cell] - spec.V0[cloud.cell]
        dw = mom.W[cloud.cell] - spec.W0[cloud.cell]
        if not (np.any(dv) or np.any(dw)):
            break
        cloud = cloud.replace(v=cloud.v - dv, w=cloud.w - dw)
    moments = deposit_moments(cloud, grid)
    return cloud, moments


def characteristic_rhs(v, w, conv_rho_at, conv_j_at, params: FHNParams):
    """Smooth part of the particle flow (the stiff local term is split off):

        dv = N(v) - w - (kernel*rho) v + (kernel*j)
        dw = tau (v + a - b w)
    """
    dv = cubic_reaction(v) - w - conv_rho_at * v + conv_j_at
    dw = adaptation_rate(v, w, params)
    return dv, dw


def relax_exact(cloud: ParticleCloud, moments: CellMoments, dt: float, eps: float) -> ParticleCloud:
    """Exact solve of the local interaction over dt with frozen cell means:

        v <- V_c + (v - V_c) exp(-rho_c dt / eps)

    Leaves w, weights and per-cell first moments j unchanged.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if math.isinf(eps):
        return cloud
    factor = np.exp(-moments.rho[cloud.cell] * (dt / eps))
    target = moments.V[cloud.cell]
    return cloud.replace(v=target + (cloud.v - target) * factor)


def kinetic_step(
    cloud: ParticleCloud,
    grid: SpatialGrid,
    kernel: DiscreteKernel,
    dt: float,
    eps: float,
    params: FHNParams,
    safety_radius: float | None = None,
    conv_rho: np.ndarray | None = None,
) -> ParticleCloud:
    """One Strang step: half relaxation, RK4 transport, half relaxation.

    The kernel convolution of rho is time-constant and may be passed in to
    avoid recomputation; the convolution of j is refreshed at every RK stage
    from the stage particle state.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    vol = grid.cell_volume
    m = grid.n_cells

    mom0 = deposit_moments(cloud, grid)
    if conv_rho is None:
        conv_rho = convolve(kernel, mom0.rho)
    half = relax_exact(cloud, mom0, 0.5 * dt, eps)

    cell = half.cell
    weight = half.weight
    conv_rho_at = conv_rho[cell]

    def stage(v, w):
        j = _kernels.bin_sums(cell, weight * v, m) / vol
        conv_j = convolve(kernel, j)
        return characteristic_rhs(v, w, conv_rho_at, conv_j[cell], params)

    v0, w0 = half.v, half.w
    with np.errstate(over="ignore", invalid="ignore"):
        k1v, k1w = stage(v0, w0)
        k2v, k2w = stage(v0 + 0.5 * dt * k1v, w0 + 0.5 * dt * k1w)
        k3v, k3w = stage(v0 + 0.5 * dt * k2v, w0 + 0.5 * dt * k2w)
        k4v, k4w = stage(v0 + dt * k3v, w0 + dt * k3w)
        v1 = v0 + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        w1 = w0 + (dt / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)

    moved = half.replace(v=v1, w=w1)
    mom1 = deposit_moments(moved, grid)
    out = relax_exact(moved, mom1, 0.5 * dt, eps)

    if not (np.all(np.isfinite(out.v)) and np.all(np.isfinite(out.w))):
        raise BlowupError("kinetic step produced non-finite particle state")
    if safety_radius is not None:
        radius = support_radius(out)
        if radius > safety_radius:
            raise BlowupError(
                f"particle support radius {radius:g} exceeded the safety radius "
                f"{safety_radius:g}; the analytic support growth bound no longer "
                "certifies this run"
            )
    return out


def support_radius(cloud: ParticleCloud) -> float:
    """Largest phase-plane norm sqrt(v^2 + w^2) over all particles (0 if empty)."""
    if cloud.n_particles == 0:
        return 0.0
    return float(np.sqrt(np.max(cloud.v**2 + cloud.w**2)))


def support_bound_log(
    params: FHNParams,
    kernel_l1: float,
    rho_inf: float,
    initial_radius: float,
    eps: float,
    horizon: float,
):
    """Conservative support growth bound, returned in log form.

    Gronwall applied to the characteristic flow gives
    radius(t) <= C2 exp(C1 (1 + 1/eps) t) with

        C1 = max(3 + 2 tau + 2 rho_inf |kernel|_1, 2 rho_inf) / 2
        C2 = sqrt(initial_radius^2 + horizon tau a^2)

    The returned callable maps t to log C2 + C1 (1 + 1/eps) t, so the bound
    can be checked without overflowing.
    """
    c1 = 0.5 * max(3.0 + 2.0 * params.tau + 2.0 * rho_inf * kernel_l1, 2.0 * rho_inf)
    c2 = math.sqrt(initial_radius**2 + horizon * params.tau * params.a**2)
    log_c2 = math.log(max(c2, 1e-300))
    inv_eps = 0.0 if math.isinf(eps) else 1.0 / eps

    def log_bound(t: float) -> float:
        return log_c2 + c1 * (1.0 + inv_eps) * t

    return log_bound
