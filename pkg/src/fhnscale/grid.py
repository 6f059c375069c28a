"""Periodic spatial grid and the discretised connectivity kernel.

The spatial domain is a periodic box centred at the origin, split into equal
cells along each axis.  Connectivity kernels are sampled at cell-centre
offsets and periodised by summing over box images, which keeps the discrete
kernel even under the periodic mirror exactly (bit for bit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import KernelResolutionError

KERNEL_SHAPES = ("gaussian", "exponential", "tophat", "zero")

#: cell-count cutoff between direct O(M^2) convolution and circular FFT
DIRECT_CELL_LIMIT = 256

#: cells with less deposited density than this are treated as empty
MASS_FLOOR = 1e-14


def _as_axis_tuple(value, dim, name, cast):
    if np.isscalar(value):
        values = (cast(value),) * dim
    else:
        values = tuple(cast(v) for v in value)
    if len(values) != dim:
        raise ValueError(f"{name} must have one entry per axis, got {values}")
    return values


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic box discretisation in one or two dimensions.

    Axis k covers [-box_length[k]/2, box_length[k]/2) with cells_per_axis[k]
    equal cells; cell centres sit at the midpoints.  Flat cell indices run in
    C order over the axis indices.
    """

    dim: int
    box_length: tuple[float, ...]
    cells_per_axis: tuple[int, ...]

    def __init__(self, dim, box_length, cells_per_axis):
        if dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {dim}")
        lengths = _as_axis_tuple(box_length, dim, "box_length", float)
        cells = _as_axis_tuple(cells_per_axis, dim, "cells_per_axis", int)
        if any(L <= 0 for L in lengths):
            raise ValueError(f"box_length must be positive, got {lengths}")
        if any(m <= 0 for m in cells):
            raise ValueError(f"cells_per_axis must be positive, got {cells}")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "box_length", lengths)
        object.__setattr__(self, "cells_per_axis", cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells_per_axis

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / m for L, m in zip(self.box_length, self.cells_per_axis))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_centers(self, axis: int) -> np.ndarray:
        L = self.box_length[axis]
        m = self.cells_per_axis[axis]
        h = L / m
        return -0.5 * L + h * (np.arange(m) + 0.5)

    @cached_property
    def cell_centers(self) -> np.ndarray:
        """Cell centres as an (n_cells, dim) array in flat-index order."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        out = np.stack([m.ravel() for m in mesh], axis=1)
        out.setflags(write=False)
        return out

    def cell_index(self, positions) -> np.ndarray:
        """Flat cell index of each point; raises if a point is outside the box."""
        pts = np.asarray(positions, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[1] != self.dim:
            raise ValueError(f"positions must have {self.dim} components per point")
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        for k in range(self.dim):
            L = self.box_length[k]
            m = self.cells_per_axis[k]
            x = pts[:, k]
            outside = (x < -0.5 * L) | (x >= 0.5 * L)
            if np.any(outside):
                bad = int(np.argmax(outside))
                raise ValueError(
                    f"position {bad} lies outside the box on axis {k}: {x[bad]!r}"
                )
            axis_idx = np.floor((x + 0.5 * L) / (L / m)).astype(np.int64)
            np.clip(axis_idx, 0, m - 1, out=axis_idx)
            idx = idx * m + axis_idx
        return idx


@dataclass(frozen=True)
class KernelSpec:
    """Parametric connectivity shape: nonnegative, even, integrable."""

    shape: str = "gaussian"
    amplitude: float = 1.0
    length_scale: float = 1.0

    def __post_init__(self):
        if self.shape not in KERNEL_SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}; choose from {KERNEL_SHAPES}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be nonnegative, got {self.amplitude}")
        if self.length_scale <= 0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")


def kernel_profile(spec: KernelSpec, r):
    """Pointwise kernel value as a function of radial distance r >= 0."""
    r = np.asarray(r, dtype=float)
    if spec.shape == "gaussian":
        return spec.amplitude * np.exp(-0.5 * (r / spec.length_scale) ** 2)
    if spec.shape == "exponential":
        return spec.amplitude * np.exp(-r / spec.length_scale)
    if spec.shape == "tophat":
        return np.where(r < spec.length_scale, spec.amplitude, 0.0)
    return np.zeros_like(r)


def kernel_callable(spec: KernelSpec):
    """Continuous-space kernel evaluated on displacement vectors (..., dim)."""

    def evaluate(disp):
        disp = np.asarray(disp, dtype=float)
        if disp.ndim == 0:
            r = np.abs(disp)
        else:
            r = np.sqrt(np.sum(disp * disp, axis=-1))
        return kernel_profile(spec, r)

    return evaluate


def _image_count(spec: KernelSpec, box_length: float) -> int:
    # enough box images that the dropped tail underflows to zero
    if spec.shape == "gaussian":
        reach = 39.0 * spec.length_scale
    elif spec.shape == "exponential":
        reach = 750.0 * spec.length_scale
    else:
        reach = spec.length_scale
    return min(int(math.ceil(reach / box_length)) + 1, 4000)


@dataclass(frozen=True)
class DiscreteKernel:
    """Kernel samples at cell-centre offsets, periodised on the grid."""

    samples: np.ndarray
    l1_norm: float
    cell_volume: float = 1.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_cells(self) -> int:
        return self.samples.size


def _mirror_canonicalize(raw_flat: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Copy each offset's value from the lexicographically smaller of the
    offset/mirror pair, making even symmetry exact."""
    idx = np.arange(raw_flat.size)
    axis_idx = np.unravel_index(idx, shape)
    mirror_axis = tuple((m - a) % m for a, m in zip(axis_idx, shape))
    mirror = np.ravel_multi_index(mirror_axis, shape)
    source = np.where(idx <= mirror, idx, mirror)
    return raw_flat[source]


def build_kernel(grid: SpatialGrid, spec: KernelSpec) -> DiscreteKernel:
    """Sample and periodise the kernel on the grid's offset lattice.

    Rejects kernels narrower than one cell spacing (they would alias to a
    near-Dirac the grid cannot represent).  The returned samples are exactly
    even under the periodic mirror.
    """
    if spec.shape != "zero" and spec.length_scale < min(grid.spacing):
        raise KernelResolutionError(
            f"length_scale {spec.length_scale} is below the cell spacing "
            f"{min(grid.spacing):g}; the kernel is under-resolved"
        )
    shape = grid.shape
    if spec.shape == "zero" or spec.amplitude == 0.0:
        samples = np.zeros(shape)
        return DiscreteKernel(samples=samples, l1_norm=0.0, cell_volume=grid.cell_volume)

    # minimal signed displacement per axis for each offset index
    deltas = []
    for k in range(grid.dim):
        m = shape[k]
        h = grid.spacing[k]
        o = np.arange(m)
        signed = np.where(o <= m // 2, o, o - m).astype(float) * h
        deltas.append(signed)
    mesh = np.meshgrid(*deltas, indexing="ij")
    base = np.stack([g.ravel() for g in mesh], axis=1)  # (M, dim)

    counts = [_image_count(spec, L) for L in grid.box_length]
    raw = np.zeros(base.shape[0])
    image_axes = [np.arange(-c, c + 1) for c in counts]
    image_mesh = np.meshgrid(*image_axes, indexing="ij")
    shifts = np.stack([g.ravel() for g in image_mesh], axis=1).astype(float)
    lengths = np.asarray(grid.box_length)
    for shift in shifts:
        disp = base + shift * lengths
        r = np.sqrt(np.sum(disp * disp, axis=1))
        raw += kernel_profile(spec, r)

    samples = _mirror_canonicalize(raw, shape).reshape(shape)
    l1 = float(samples.sum() * grid.cell_volume)
    return DiscreteKernel(samples=samples, l1_norm=l1, cell_volume=grid.cell_volume)


def _check_field(kernel: DiscreteKernel, arr, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.size != kernel.n_cells:
        raise ValueError(
            f"{name} has {arr.size} entries but the grid has {kernel.n_cells} cells"
        )
    return arr


def convolve(kernel: DiscreteKernel, field, method: str = "auto") -> np.ndarray:
    """Periodic discrete convolution (kernel * field) weighted by cell volume.

    ``method`` is "auto" (direct up to DIRECT_CELL_LIMIT cells, FFT above),
    "direct", or "fft".  The direct path accumulates offsets in a fixed order.
    """
    arr = _check_field(kernel, field, "field")
    shaped = arr.reshape(kernel.samples.shape)
    if method == "auto":
        method = "direct" if kernel.n_cells <= DIRECT_CELL_LIMIT else "fft"
    if method == "direct":
        out = _kernels.convolve_direct(kernel.samples, shaped, kernel.cell_volume)
    elif method == "fft":
        out = _kernels.convolve_fft(kernel.samples, shaped, kernel.cell_volume)
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    return out.reshape(np.shape(arr))


def nonlocal_operator(kernel: DiscreteKernel, rho, V, method: str = "auto") -> np.ndarray:
    """Nonlocal diffusion L_rho(V) = -(kernel*rho) V + kernel*(rho V).

    Evaluated in difference form, sum_o k_o rho(c-o) (V(c-o) - V(c)) vol,
    which annihilates constant V exactly.  rho must be nonnegative.
    """
    rho_arr = _check_field(kernel, rho, "rho")
    V_arr = _check_field(kernel, V, "V")
    if rho_arr.size and float(rho_arr.min()) < 0.0:
        bad = int(np.argmin(rho_arr))
        raise ValueError(f"rho must be nonnegative; entry {bad} is {rho_arr.ravel()[bad]!r}")
    shape = kernel.samples.shape
    if method == "auto":
        method = "direct" if kernel.n_cells <= DIRECT_CELL_LIMIT else "fft"
    if method == "direct":
        out = _kernels.nonlocal_diff(
            kernel.samples, rho_arr.reshape(shape), V_arr.reshape(shape), kernel.cell_volume
        )
        return out.reshape(np.shape(rho_arr))
    conv_rho = convolve(kernel, rho_arr, method=method)
    conv_rho_v = convolve(kernel, rho_arr * V_arr, method=method)
    return -conv_rho * V_arr + conv_rho_v


def interaction_energy(kernel: DiscreteKernel, rho, V) -> float:
    """Double sum  sum_{c,c'} k(c-c') rho_c rho_c' (V_c - V_c')^2 vol^2  (>= 0)."""
    rho_arr = _check_field(kernel, rho, "rho")
    V_arr = _check_field(kernel, V, "V")
    shape = kernel.samples.shape
    acc = _kernels.pair_energy(kernel.samples, rho_arr.reshape(shape), V_arr.reshape(shape))
    return float(acc) * kernel.cell_volume**2
