"""Moment, dissipation and entropy diagnostics for the multiscale runs.

Every spatial integral is the plain cell-sum quadrature with cell-volume
weights, matching the order of the particle deposition.  Time derivatives in
residuals are centred finite differences on the stored records, one-sided at
the endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation
from .fhn import adaptation_rate, cubic_reaction
from .grid import DiscreteKernel, SpatialGrid, interaction_energy, nonlocal_operator
from .kinetic import CellMoments, ParticleCloud
from .macro import AdaptationCloud, MacroFields

MOMENT_ORDERS = (0, 2, 4, 6)


@dataclass
class MomentRecord:
    """Global moments of the particle density at one time.

    mu_x, mu_v, mu_w map even orders to sum(weight |z|^order); order 6 is
    tracked in v only.  mu_total sums the three directions per order.
    """

    t: float
    mu_x: dict = field(default_factory=dict)
    mu_v: dict = field(default_factory=dict)
    mu_w: dict = field(default_factory=dict)

    @property
    def mu_total(self) -> dict:
        return {
            k: self.mu_x[k] + self.mu_v[k] + self.mu_w[k]
            for k in self.mu_x
            if k in self.mu_v and k in self.mu_w
        }


@dataclass
class EntropyRecord:
    """Entropy-side diagnostics at one time."""

    t: float
    eta: float
    eta_rel: float
    D1: float
    D2: float
    E_l1: float
    Rl: float
    Rnl: float
    Sl: float
    Snl: float
    balance_residual: float = float("nan")


def moments(cloud: ParticleCloud, grid: SpatialGrid, t: float = 0.0, orders=MOMENT_ORDERS) -> MomentRecord:
    """Even moments of the cloud; particle positions are their cell centres."""
    bad = set(orders) - set(MOMENT_ORDERS)
    if bad:
        raise ValueError(f"unsupported moment orders {sorted(bad)}; allowed {MOMENT_ORDERS}")
    rec = MomentRecord(t=t)
    if cloud.n_particles == 0:
        for k in orders:
            if k != 6:
                rec.mu_x[k] = 0.0
                rec.mu_w[k] = 0.0
            rec.mu_v[k] = 0.0
        return rec
    x = grid.cell_centers[cloud.cell]
    xnorm = np.sqrt(np.sum(x * x, axis=1))
    av = np.abs(cloud.v)
    aw = np.abs(cloud.w)
    for k in orders:
        rec.mu_v[k] = float(np.sum(cloud.weight * av**k))
        if k != 6:
            rec.mu_x[k] = float(np.sum(cloud.weight * xnorm**k))
            rec.mu_w[k] = float(np.sum(cloud.weight * aw**k))
    return rec


def dissipation(cloud: ParticleCloud, cell_moments: CellMoments, p: int) -> float:
    """Local-interaction dissipation of moment order 2p:

        D_p = sum_particles weight rho_cell v^(2p-1) (v - V_cell)  >= 0.

    A value below -1e-12 indicates an inconsistent deposition and raises.
    """
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p}")
    rho_at = cell_moments.rho[cloud.cell]
    V_at = cell_moments.V[cloud.cell]
    value = float(np.sum(cloud.weight * rho_at * cloud.v ** (2 * p - 1) * (cloud.v - V_at)))
    if value < -1e-12:
        raise InvariantViolation(
            f"dissipation D_{p} = {value!r} is negative beyond tolerance; "
            "cell moments do not match the cloud"
        )
    return value


def _finite_difference(times: np.ndarray, series: np.ndarray) -> np.ndarray:
    """Centred differences inside, one-sided (second order where possible) at
    the ends."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two records to differentiate")
    out = np.empty_like(series)
    if times.size == 2:
        out[:] = (series[1] - series[0]) / (times[1] - times[0])
        return out
    out[1:-1] = (series[2:] - series[:-2]) / (times[2:] - times[:-2])
    # second-order stencils need two equal intervals at the boundary
    h0, h0b = times[1] - times[0], times[2] - times[1]
    if abs(h0b - h0) <= 1e-12 * h0:
        out[0] = (-3.0 * series[0] + 4.0 * series[1] - series[2]) / (2.0 * h0)
    else:
        out[0] = (series[1] - series[0]) / h0
    h1, h1b = times[-1] - times[-2], times[-2] - times[-3]
    if abs(h1b - h1) <= 1e-12 * h1:
        out[-1] = (3.0 * series[-1] - 4.0 * series[-2] + series[-3]) / (2.0 * h1)
    else:
        out[-1] = (series[-1] - series[-2]) / h1
    return out


def moment_inequality_constant(p: int, tau: float, a: float) -> float:
    """Explicit constant of the moment growth inequality at order 2p."""
    return max(
        (2 * p - 1) / (2 * p) + tau * (2 * p - 1) / p + 1.0,
        tau * abs(a) ** (2 * p) / (2 * p),
    )


def moment_inequality_residual(records, D_series, eps: float, p: int, tau: float, a: float) -> float:
    """Largest signed excess of the moment growth inequality over the run:

        (1/2p) d/dt (mu_2p^v + mu_2p^w) + mu_(2p+2)^v + D_p / eps
            - C (mu_2p^v + mu_2p^w + 1)   <=  0  (up to discretisation)

    Returns max_t of the left side; nonpositive means the bound held.
    """
    if len(records) < 2:
        raise ValueError("need at least two moment records")
    if len(records) != len(D_series):
        raise ValueError("records and dissipation series must align")
    times = np.array([r.t for r in records])
    base = np.array([r.mu_v[2 * p] + r.mu_w[2 * p] for r in records])
    higher = np.array([r.mu_v[2 * p + 2] for r in records])
    rate = _finite_difference(times, base)
    const = moment_inequality_constant(p, tau, a)
    lhs = rate / (2 * p) + higher + np.asarray(D_series, dtype=float) / eps - const * (base + 1.0)
    return float(np.max(lhs))


def _rho_of(state) -> np.ndarray:
    return state.rho if isinstance(state, CellMoments) else state.rho0


def entropy(state, grid: SpatialGrid) -> float:
    """Quadratic entropy  sum_c rho (V^2 + W^2) / 2 * vol  of macro fields or
    deposited moments."""
    rho = _rho_of(state)
    return float(np.sum(rho * (state.V**2 + state.W**2)) * 0.5 * grid.cell_volume)


def relative_entropy(state_a, state_b, grid: SpatialGrid) -> float:
    """Density-weighted squared field distance

        sum_c rho_a (|V_b - V_a|^2 + |W_b - W_a|^2) / 2 * vol  >= 0,

    zero exactly when the fields agree on the support of rho_a.
    """
    rho = _rho_of(state_a)
    dv = state_b.V - state_a.V
    dw = state_b.W - state_a.W
    return float(np.sum(rho * (dv * dv + dw * dw)) * 0.5 * grid.cell_volume)


def error_term(cloud: ParticleCloud, cell_moments: CellMoments, grid: SpatialGrid, reaction=cubic_reaction) -> np.ndarray:
    """Per-cell closure defect of the reaction term:

        E_c = sum_{p in c} weight (N(v_p) - N(V_c)) / vol,

    zero for mono-kinetic cells and for any linear reaction."""
    m = grid.n_cells
    V_at = cell_moments.V[cloud.cell]
    contrib = cloud.weight * (reaction(cloud.v) - reaction(V_at))
    return np.bincount(cloud.cell, weights=contrib, minlength=m) / grid.cell_volume


def remainder_terms(z_eps: CellMoments, z: MacroFields, kernel: DiscreteKernel):
    """Local and nonlocal remainder integrals (Rl, Rnl, Sl, Snl) entering the
    relative-entropy balance, with the kinetic moments as the probe state.

    Snl is evaluated as the explicit pair double sum and is nonpositive by
    construction.
    """
    vol = kernel.cell_volume
    params = z.params
    rho_t, V_t, W_t = z_eps.rho, z_eps.V, z_eps.W
    V, W = z.V, z.W

    dV = V - V_t
    dW = W - W_t
    rl_v = np.sum(rho_t * dV * (cubic_reaction(V) - W - cubic_reaction(V_t) + W_t))
    rl_w = np.sum(rho_t * dW * (adaptation_rate(V, W, params) - adaptation_rate(V_t, W_t, params)))
    rl = float((rl_v + rl_w) * vol)
    sl_sum = np.sum(
        rho_t * (V_t * cubic_reaction(V_t) - V_t * W_t + W_t * adaptation_rate(V_t, W_t, params))
    )
    sl = float(-sl_sum * vol)
    l_z = nonlocal_operator(kernel, z.rho0, V)
    l_t = nonlocal_operator(kernel, rho_t, V_t)
    rnl = float(np.sum(rho_t * dV * (l_z - l_t)) * vol)
    snl = -0.5 * interaction_energy(kernel, rho_t, V_t)
    return rl, rnl, sl, snl


def entropy_balance_series(times, eta_rel, coupling, Rl, Rnl) -> np.ndarray:
    """Per-time defect of  d/dt eta_rel = coupling + Rl + Rnl."""
    times = np.asarray(times, dtype=float)
    arrays = [np.asarray(a, dtype=float) for a in (eta_rel, coupling, Rl, Rnl)]
    if any(a.shape != times.shape for a in arrays):
        raise ValueError("time series must share one length")
    rate = _finite_difference(times, arrays[0])
    return rate - (arrays[1] + arrays[2] + arrays[3])


def entropy_balance_residual(times, eta_rel, coupling, Rl, Rnl) -> float:
    """Largest absolute defect of the relative-entropy balance over the run."""
    return float(np.max(np.abs(entropy_balance_series(times, eta_rel, coupling, Rl, Rnl))))


def velocity_variance(cloud: ParticleCloud, cell_moments: CellMoments, weighted: bool) -> float:
    """Spread of v around the cell means: sum weight |v - V_cell|^2, with an
    extra rho_cell factor when weighted."""
    V_at = cell_moments.V[cloud.cell]
    dev = cloud.v - V_at
    if weighted:
        return float(np.sum(cloud.weight * cell_moments.rho[cloud.cell] * dev * dev))
    return float(np.sum(cloud.weight * dev * dev))


def weak_convergence_gap(
    cloud: ParticleCloud,
    adaptation: AdaptationCloud,
    fields: MacroFields,
    testfn,
    grid: SpatialGrid,
) -> float:
    """Gap between the kinetic measure and the concentrated limit measure on
    a bounded test function phi(x, v, w):

        | sum_cloud weight phi(x_p, v_p, w_p)
          - sum_F weight phi(x_q, V(cell_q), w_q) |.
    """
    x_cloud = grid.cell_centers[cloud.cell]
    lhs = float(np.sum(cloud.weight * testfn(x_cloud, cloud.v, cloud.w)))
    x_f = grid.cell_centers[adaptation.cell]
    v_f = fields.V[adaptation.cell]
    rhs = float(np.sum(adaptation.weight * testfn(x_f, v_f, adaptation.w)))
    return abs(lhs - rhs)
