"""Hot numeric inner loops, in paired numba/numpy variants.

Each operation exists twice: an ``*_jit`` version built from explicit loops
(compiled with numba when available) and an ``*_numpy`` version vectorised
per kernel offset.  Both accumulate in the same fixed order, so for the
direct convolution and the binned sums the two variants agree bit for bit.
Module-level aliases select the active variant once at import time.
"""

from __future__ import annotations

import numpy as np

from .backend import NUMBA_ENABLED, njit

# ---------------------------------------------------------------------------
# periodic direct convolution: out[c] = vol * sum_o samples[o] field[c - o]
# ---------------------------------------------------------------------------


@njit
def _convolve_1d_jit(samples, field, vol):
    m = field.shape[0]
    out = np.zeros(m)
    for o in range(m):
        s = samples[o]
        if s == 0.0:
            continue
        for c in range(m):
            out[c] += s * field[(c - o) % m]
    return out * vol


@njit
def _convolve_2d_jit(samples, field, vol):
    m1, m2 = field.shape
    out = np.zeros((m1, m2))
    for o1 in range(m1):
        for o2 in range(m2):
            s = samples[o1, o2]
            if s == 0.0:
                continue
            for c1 in range(m1):
                for c2 in range(m2):
                    out[c1, c2] += s * field[(c1 - o1) % m1, (c2 - o2) % m2]
    return out * vol


def convolve_direct_jit(samples, field, vol):
    if field.ndim == 1:
        return _convolve_1d_jit(samples, field, vol)
    return _convolve_2d_jit(samples, field, vol)


def convolve_direct_numpy(samples, field, vol):
    out = np.zeros_like(field)
    if field.ndim == 1:
        for o in range(field.shape[0]):
            s = samples[o]
            if s == 0.0:
                continue
            out += s * np.roll(field, o)
    else:
        for o1 in range(field.shape[0]):
            for o2 in range(field.shape[1]):
                s = samples[o1, o2]
                if s == 0.0:
                    continue
                out += s * np.roll(np.roll(field, o1, axis=0), o2, axis=1)
    return out * vol


def convolve_fft(samples, field, vol):
    """Circular convolution via real FFTs; used above the direct-size cutoff."""
    axes = tuple(range(field.ndim))
    spec = np.fft.rfftn(samples, axes=axes) * np.fft.rfftn(field, axes=axes)
    return np.fft.irfftn(spec, s=field.shape, axes=axes) * vol


# ---------------------------------------------------------------------------
# nonlocal coupling in difference form:
#   out[c] = vol * sum_o samples[o] rho[c - o] (field[c - o] - field[c])
# The difference form vanishes exactly on constant fields.
# ---------------------------------------------------------------------------


@njit
def _nonlocal_1d_jit(samples, rho, field, vol):
    m = field.shape[0]
    out = np.zeros(m)
    for o in range(m):
        s = samples[o]
        if s == 0.0:
            continue
        for c in range(m):
            cp = (c - o) % m
            out[c] += s * rho[cp] * (field[cp] - field[c])
    return out * vol


@njit
def _nonlocal_2d_jit(samples, rho, field, vol):
    m1, m2 = field.shape
    out = np.zeros((m1, m2))
    for o1 in range(m1):
        for o2 in range(m2):
            s = samples[o1, o2]
            if s == 0.0:
                continue
            for c1 in range(m1):
                for c2 in range(m2):
                    p1 = (c1 - o1) % m1
                    p2 = (c2 - o2) % m2
                    out[c1, c2] += s * rho[p1, p2] * (field[p1, p2] - field[c1, c2])
    return out * vol


def nonlocal_diff_jit(samples, rho, field, vol):
    if field.ndim == 1:
        return _nonlocal_1d_jit(samples, rho, field, vol)
    return _nonlocal_2d_jit(samples, rho, field, vol)


def nonlocal_diff_numpy(samples, rho, field, vol):
    out = np.zeros_like(field)
    if field.ndim == 1:
        for o in range(field.shape[0]):
            s = samples[o]
            if s == 0.0:
                continue
            out += s * np.roll(rho, o) * (np.roll(field, o) - field)
    else:
        for o1 in range(field.shape[0]):
            for o2 in range(field.shape[1]):
                s = samples[o1, o2]
                if s == 0.0:
                    continue
                rho_s = np.roll(np.roll(rho, o1, axis=0), o2, axis=1)
                fld_s = np.roll(np.roll(field, o1, axis=0), o2, axis=1)
                out += s * rho_s * (fld_s - field)
    return out * vol


# ---------------------------------------------------------------------------
# interaction energy double sum:
#   sum_{c,c'} samples[c - c'] rho[c] rho[c'] (field[c] - field[c'])^2
# ---------------------------------------------------------------------------


@njit
def _pair_energy_1d_jit(samples, rho, field):
    m = field.shape[0]
    acc = 0.0
    for o in range(m):
        s = samples[o]
        if s == 0.0:
            continue
        for c in range(m):
            cp = (c - o) % m
            d = field[c] - field[cp]
            acc += s * rho[c] * rho[cp] * d * d
    return acc


@njit
def _pair_energy_2d_jit(samples, rho, field):
    m1, m2 = field.shape
    acc = 0.0
    for o1 in range(m1):
        for o2 in range(m2):
            s = samples[o1, o2]
            if s == 0.0:
                continue
            for c1 in range(m1):
                for c2 in range(m2):
                    p1 = (c1 - o1) % m1
                    p2 = (c2 - o2) % m2
                    d = field[c1, c2] - field[p1, p2]
                    acc += s * rho[c1, c2] * rho[p1, p2] * d * d
    return acc


def pair_energy_jit(samples, rho, field):
    if field.ndim == 1:
        return _pair_energy_1d_jit(samples, rho, field)
    return _pair_energy_2d_jit(samples, rho, field)


def pair_energy_numpy(samples, rho, field):
    acc = 0.0
    if field.ndim == 1:
        for o in range(field.shape[0]):
            s = samples[o]
            if s == 0.0:
                continue
            d = field - np.roll(field, o)
            acc += s * float(np.sum(rho * np.roll(rho, o) * d * d))
    else:
        for o1 in range(field.shape[0]):
            for o2 in range(field.shape[1]):
                s = samples[o1, o2]
                if s == 0.0:
                    continue
                rho_s = np.roll(np.roll(rho, o1, axis=0), o2, axis=1)
                fld_s = np.roll(np.roll(field, o1, axis=0), o2, axis=1)
                d = field - fld_s
                acc += s * float(np.sum(rho * rho_s * d * d))
    return acc


# ---------------------------------------------------------------------------
# per-cell accumulation of particle quantities (deterministic particle order)
# ---------------------------------------------------------------------------


@njit
def bin_sums_jit(cell, values, n_cells):
    out = np.zeros(n_cells)
    for p in range(cell.shape[0]):
        out[cell[p]] += values[p]
    return out


def bin_sums_numpy(cell, values, n_cells):
    # np.bincount accumulates in input order, matching the jit loop exactly.
    return np.bincount(cell, weights=values, minlength=n_cells)


# ---------------------------------------------------------------------------
# network coupling: out[i] = (1/n) sum_j K[i, j] (v[i] - v[j])
# ---------------------------------------------------------------------------


@njit
def coupling_sum_jit(coupling, v):
    n = v.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        vi = v[i]
        for j in range(n):
            acc += coupling[i, j] * (vi - v[j])
        out[i] = acc / n
    return out


def coupling_sum_numpy(coupling, v):
    n = v.shape[0]
    return (v * coupling.sum(axis=1) - coupling @ v) / n


if NUMBA_ENABLED:
    convolve_direct = convolve_direct_jit
    nonlocal_diff = nonlocal_diff_jit
    pair_energy = pair_energy_jit
    bin_sums = bin_sums_jit
    coupling_sum = coupling_sum_jit
else:
    convolve_direct = convolve_direct_numpy
    nonlocal_diff = nonlocal_diff_numpy
    pair_energy = pair_energy_numpy
    bin_sums = bin_sums_numpy
    coupling_sum = coupling_sum_numpy
