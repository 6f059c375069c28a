"""Orchestration of the three scales plus sweeps, monitors and file output.

A run advances the particle solver at one interaction strength eps alongside
the limit system on the same grid and time step, records the diagnostics
table, and checks the runtime invariant monitors.  Sweeps fan runs out over
an eps or network-size list and fit log-log slopes.

All CSV output is written with shortest-round-trip float formatting and a
fixed row order, so identical configurations reproduce identical bytes
regardless of the thread count.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .backend import HAVE_NUMBA, backend_name
from .diagnostics import (
    EntropyRecord,
    dissipation,
    entropy,
    entropy_balance_series,
    error_term,
    moments,
    relative_entropy,
    remainder_terms,
    velocity_variance,
    weak_convergence_gap,
)
from .errors import ConfigError
from .fhn import FHNParams
from .grid import KernelSpec, convolve, kernel_callable
from .kinetic import (
    deposit_moments,
    initial_state,
    kinetic_step,
    relax_exact,
    support_bound_log,
    support_radius,
)
from .macro import (
    FieldTrajectory,
    MacroFields,
    adaptation_from_cloud,
    advect_F,
    consistency_W,
    macro_step,
)
from .micro import MollifiedDirac, NeuronNetworkState, empirical_macro, micro_step, pairwise_coupling
from .scenario import Scenario

DIAGNOSTIC_COLUMNS = [
    "t",
    "mu0",
    "mu2_v",
    "mu2_w",
    "mu4_v",
    "mu4_w",
    "mu6_v",
    "D1",
    "D2",
    "entropy",
    "rel_entropy",
    "E_l1",
    "Rl",
    "Rnl",
    "Sl",
    "Snl",
    "balance_residual",
    "var_weighted",
    "var_unweighted",
    "support_R",
]

SWEEP_EPS_COLUMNS = [
    "param_value",
    "sup_rel_entropy",
    "int_var_weighted",
    "int_var_unweighted",
    "weak_gap",
    "slope_partial",
]

SWEEP_N_COLUMNS = ["param_value", "mean_distance", "std_distance", "slope_partial"]


def _phi_one(x, v, w):
    return np.ones_like(v)


def _phi_v(x, v, w):
    return v


def _phi_w(x, v, w):
    return w


def _phi_bump(x, v, w):
    r2 = np.sum(x * x, axis=-1) + v * v + w * w
    return np.exp(-0.5 * r2)


PHI_FAMILY = {"one": _phi_one, "v": _phi_v, "w": _phi_w, "bump": _phi_bump}


# ---------------------------------------------------------------------------
# formatting / output helpers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(x) for x in row) + "\n")


def write_manifest(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _versions() -> dict:
    versions = {
        "fhnscale": __version__,
        "numpy": np.__version__,
        "python": sys.version.split()[0],
    }
    if HAVE_NUMBA:
        import numba

        versions["numba"] = numba.__version__
    return versions


# ---------------------------------------------------------------------------
# slope fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    n_points: int


def fit_loglog_slope(x, y) -> SlopeFit:
    """Least-squares slope of log(y) against log(x); needs >= 3 points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError(f"slope fit needs at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("slope fit needs strictly positive values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    return SlopeFit(slope=float(slope), intercept=float(intercept), residual=rms, n_points=int(x.size))


def _partial_slope(x, y) -> float:
    if len(x) < 2:
        return float("nan")
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


# ---------------------------------------------------------------------------
# macro trajectory
# ---------------------------------------------------------------------------


@dataclass
class MacroTrajectory:
    times: np.ndarray
    V: np.ndarray  # (n_records, n_cells)
    W: np.ndarray
    rho0: np.ndarray
    params: FHNParams
    energy_monitor: dict

    def fields_at(self, index: int) -> MacroFields:
        return MacroFields(rho0=self.rho0, V=self.V[index], W=self.W[index], params=self.params)

    def v_trajectory(self) -> FieldTrajectory:
        return FieldTrajectory(times=self.times, values=self.V)


def simulate_macro(scenario: Scenario, fields0: MacroFields, n_steps: int, dt: float) -> MacroTrajectory:
    """Integrate the limit system, storing every step, and check the sup-norm
    growth bound (initial + C) exp(C t) derived from the energy estimate."""
    m = scenario.grid.n_cells
    times = np.arange(n_steps + 1) * dt
    V = np.empty((n_steps + 1, m))
    W = np.empty((n_steps + 1, m))
    fields = fields0
    V[0], W[0] = fields.V, fields.W
    for k in range(1, n_steps + 1):
        fields = macro_step(fields, scenario.kernel, dt)
        V[k], W[k] = fields.V, fields.W

    rho_inf = float(np.max(fields0.rho0))
    K = max(
        0.5 * (3.0 + scenario.params.tau) + scenario.kernel.l1_norm * rho_inf,
        0.5 * (1.0 + 2.0 * scenario.params.tau),
    )
    C = max(K, abs(scenario.params.a) * math.sqrt(scenario.params.tau / (2.0 * K)))
    s0 = math.sqrt(float(np.max(V[0] ** 2)) + float(np.max(W[0] ** 2)))
    sup_norm = np.sqrt(np.max(V**2 + W**2, axis=1))
    bound = (s0 + C) * np.exp(C * times)
    ok = bool(np.all(sup_norm <= bound + 1e-12))
    worst = float(np.max(sup_norm - bound))
    monitor = {
        "passed": ok,
        "detail": f"max sup-norm excess over (s0 + C) exp(C t): {worst:.3e} with C={C:.4g}",
    }
    return MacroTrajectory(
        times=times, V=V, W=W, rho0=fields0.rho0, params=scenario.params, energy_monitor=monitor
    )


# ---------------------------------------------------------------------------
# single run
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    eps: float
    times: np.ndarray
    columns: dict
    monitors: dict
    weak_gaps: dict
    consistency_max: float
    sup_rel_entropy: float
    int_var_weighted: float
    int_var_unweighted: float
    moment_sup: dict
    int_mu6: float
    amplitude_factor: float
    out_dir: str | None = None

    @property
    def all_monitors_passed(self) -> bool:
        return all(m["passed"] for m in self.monitors.values())


def run_scenario(
    scenario: Scenario,
    eps: float | None = None,
    macro: MacroTrajectory | None = None,
    out_dir: str | None = None,
) -> RunResult:
    """Run the particle solver at one eps against the shared limit solution.

    Writes diagnostics.csv, snapshot CSVs and manifest.json into out_dir when
    given.  Monitor outcomes are collected, never raised; solver blow-ups are
    annotated with the failing time and re-raised.
    """
    cfg = scenario.config
    eps_value = cfg.eps if eps is None else float(eps)
    if eps_value <= 0:
        raise ConfigError([f"eps: must be positive, got {eps_value}"])
    dt = cfg.dt
    n_steps = int(round(cfg.t_final / dt)) if cfg.t_final > 0 else 0
    stride = cfg.record_stride
    grid, kernel, params = scenario.grid, scenario.kernel, scenario.params
    started = time.perf_counter()

    cloud, mom0 = initial_state(scenario.init, grid)
    fields0 = MacroFields(
        rho0=mom0.rho, V=mom0.V.copy(), W=mom0.W.copy(), params=params
    )
    if macro is None:
        macro = simulate_macro(scenario, fields0, n_steps, dt)
    conv_rho = convolve(kernel, mom0.rho)
    log_bound = support_bound_log(
        params,
        kernel.l1_norm,
        float(np.max(mom0.rho)),
        support_radius(cloud),
        eps_value,
        cfg.t_final,
    )

    record_idx: list[int] = []
    rows: dict = {name: [] for name in DIAGNOSTIC_COLUMNS}
    coupling_series: list[float] = []
    mu_total_series: dict = {0: [], 2: [], 4: []}
    rho_drift = 0.0
    mass0 = cloud.total_mass()
    mass_drift = 0.0
    support_ok = True
    support_excess = -math.inf

    def record(step: int, current) -> None:
        nonlocal rho_drift, mass_drift, support_ok, support_excess
        t = step * dt
        mom = deposit_moments(current, grid)
        z = macro.fields_at(step)
        mrec = moments(current, grid, t=t)
        e_field = error_term(current, mom, grid)
        rl, rnl, sl, snl = remainder_terms(mom, z, kernel)
        erec = EntropyRecord(
            t=t,
            eta=entropy(mom, grid),
            eta_rel=relative_entropy(mom, z, grid),
            D1=dissipation(current, mom, 1),
            D2=dissipation(current, mom, 2),
            E_l1=float(np.sum(np.abs(e_field)) * grid.cell_volume),
            Rl=rl,
            Rnl=rnl,
            Sl=sl,
            Snl=snl,
        )
        coupling = float(np.sum((mom.V - z.V) * e_field) * grid.cell_volume)
        radius = support_radius(current)

        rows["t"].append(t)
        rows["mu0"].append(mrec.mu_total[0])
        rows["mu2_v"].append(mrec.mu_v[2])
        rows["mu2_w"].append(mrec.mu_w[2])
        rows["mu4_v"].append(mrec.mu_v[4])
        rows["mu4_w"].append(mrec.mu_w[4])
        rows["mu6_v"].append(mrec.mu_v[6])
        rows["D1"].append(erec.D1)
        rows["D2"].append(erec.D2)
        rows["entropy"].append(erec.eta)
        rows["rel_entropy"].append(erec.eta_rel)
        rows["E_l1"].append(erec.E_l1)
        rows["Rl"].append(erec.Rl)
        rows["Rnl"].append(erec.Rnl)
        rows["Sl"].append(erec.Sl)
        rows["Snl"].append(erec.Snl)
        rows["balance_residual"].append(0.0)
        rows["var_weighted"].append(velocity_variance(current, mom, True))
        rows["var_unweighted"].append(velocity_variance(current, mom, False))
        rows["support_R"].append(radius)
        coupling_series.append(coupling)
        for k in (0, 2, 4):
            mu_total_series[k].append(mrec.mu_total[k])
        record_idx.append(step)

        mass_drift = max(mass_drift, abs(current.total_mass() - mass0) / mass0)
        scale = float(np.max(mom0.rho))
        rho_drift = max(rho_drift, float(np.max(np.abs(mom.rho - mom0.rho))) / scale)
        if radius > 0:
            excess = math.log(radius) - log_bound(t)
            support_excess = max(support_excess, excess)
            if excess > 0:
                support_ok = False

    record(0, cloud)
    current = cloud
    step = 0
    try:
        for step in range(1, n_steps + 1):
            current = kinetic_step(
                current,
                grid,
                kernel,
                dt,
                eps_value,
                params,
                safety_radius=scenario.init.safety_radius,
                conv_rho=conv_rho,
            )
            if step % stride == 0 or step == n_steps:
                record(step, current)
    except Exception as exc:
        exc.args = (f"[t={step * dt:g}, eps={eps_value:g}] {exc}",) + exc.args[1:]
        raise

    # adaptation transport against the stored limit potential; steps span two
    # stored nodes so every RK4 stage reads an exact node value
    F = adaptation_from_cloud(cloud.cell, cloud.w, cloud.weight)
    v_traj = macro.v_trajectory()
    done = 0
    while done + 2 <= n_steps:
        F = advect_F(F, v_traj, 2.0 * dt, params)
        done += 2
    if done < n_steps:
        F = advect_F(F, v_traj, dt, params)

    times = np.asarray(rows["t"])
    columns = {name: np.asarray(values) for name, values in rows.items()}
    if times.size >= 2:
        columns["balance_residual"] = entropy_balance_series(
            times,
            columns["rel_entropy"],
            np.asarray(coupling_series),
            columns["Rl"],
            columns["Rnl"],
        )

    z_final = macro.fields_at(n_steps)
    weak_gaps = {
        name: weak_convergence_gap(current, F, z_final, phi, grid)
        for name, phi in PHI_FAMILY.items()
    }
    consistency_max = float(np.max(consistency_W(F, z_final, grid)))

    monitors = {
        "mass_conservation": {
            "passed": mass_drift <= 1e-12,
            "detail": f"max relative total-mass drift {mass_drift:.3e}",
        },
        "density_constancy": {
            "passed": rho_drift <= 1e-12,
            "detail": f"max per-cell density drift {rho_drift:.3e} (relative to peak)",
        },
        "dissipation_sign": {
            "passed": bool(min(columns["D1"].min(), columns["D2"].min()) >= -1e-12),
            "detail": f"min D1 {columns['D1'].min():.3e}, min D2 {columns['D2'].min():.3e}",
        },
        "nonlocal_energy_sign": {
            "passed": bool(columns["Snl"].max() <= 1e-12),
            "detail": f"max Snl {columns['Snl'].max():.3e}",
        },
        "support_bound": {
            "passed": support_ok,
            "detail": f"max log-excess over growth bound {support_excess:.3e}",
        },
        "macro_energy_bound": macro.energy_monitor,
    }

    result = RunResult(
        eps=eps_value,
        times=times,
        columns=columns,
        monitors=monitors,
        weak_gaps=weak_gaps,
        consistency_max=consistency_max,
        sup_rel_entropy=float(columns["rel_entropy"].max()),
        int_var_weighted=float(np.trapezoid(columns["var_weighted"], times)) if times.size > 1 else 0.0,
        int_var_unweighted=float(np.trapezoid(columns["var_unweighted"], times)) if times.size > 1 else 0.0,
        moment_sup={k: float(np.max(mu_total_series[k])) for k in (0, 2, 4)},
        int_mu6=float(np.trapezoid(columns["mu6_v"], times)) if times.size > 1 else 0.0,
        amplitude_factor=F.amplitude_factor,
        out_dir=out_dir,
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_run_outputs(scenario, result, current, F, macro, record_idx, started)
    return result


def _write_run_outputs(scenario, result, cloud, F, macro, record_idx, started) -> None:
    grid = scenario.grid
    out_dir = result.out_dir
    write_csv(
        os.path.join(out_dir, "diagnostics.csv"),
        DIAGNOSTIC_COLUMNS,
        zip(*(result.columns[name] for name in DIAGNOSTIC_COLUMNS)),
    )

    mom = deposit_moments(cloud, grid)
    dev = (cloud.v - mom.V[cloud.cell]) ** 2
    var_cell = np.bincount(cloud.cell, weights=cloud.weight * dev, minlength=grid.n_cells)
    mass_cell = np.bincount(cloud.cell, weights=cloud.weight, minlength=grid.n_cells)
    variance_v = np.divide(var_cell, mass_cell, out=np.zeros(grid.n_cells), where=mass_cell > 0)
    axis_names = ["x", "y"][: grid.dim]
    centers = grid.cell_centers
    write_csv(
        os.path.join(out_dir, "kinetic_cells_final.csv"),
        ["cell", *axis_names, "rho", "V", "W", "variance_v"],
        (
            (c, *centers[c], mom.rho[c], mom.V[c], mom.W[c], variance_v[c])
            for c in range(grid.n_cells)
        ),
    )
    if scenario.config.dump_particles:
        write_csv(
            os.path.join(out_dir, "kinetic_particles_final.csv"),
            ["cell", "v", "w", "weight"],
            zip(cloud.cell, cloud.v, cloud.w, cloud.weight),
        )
    write_csv(
        os.path.join(out_dir, "macro_timeseries.csv"),
        ["t", "cell", "rho0", "V", "W"],
        (
            (macro.times[k], c, macro.rho0[c], macro.V[k, c], macro.W[k, c])
            for k in record_idx
            for c in range(grid.n_cells)
        ),
    )
    write_csv(
        os.path.join(out_dir, "adaptation_particles_final.csv"),
        ["cell", "w", "weight"],
        zip(F.cell, F.w, F.weight),
    )
    write_manifest(
        os.path.join(out_dir, "manifest.json"),
        {
            "config": scenario.config.to_dict(),
            "versions": _versions(),
            "backend": backend_name(),
            "eps": result.eps,
            "seed": scenario.config.seed,
            "monitors": result.monitors,
            "weak_gaps": result.weak_gaps,
            "consistency_max_residual": result.consistency_max,
            "adaptation_amplitude_factor": result.amplitude_factor,
            "sup_rel_entropy": result.sup_rel_entropy,
            "timings": {"total_seconds": time.perf_counter() - started},
        },
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    param_name: str
    param_values: list
    points: list
    slopes: dict
    runs: list = field(default_factory=list)
    aborted: bool = False

    def inversions(self, key: str, rel_tol: float = 0.05, atol: float = 1e-12) -> int:
        """Count increases of a per-point metric along the parameter list
        beyond the relative tolerance (values below atol are treated as ties)."""
        values = [pt[key] for pt in self.points]
        return sum(1 for a, b in zip(values, values[1:]) if b > max((1.0 + rel_tol) * a, atol))


def sweep_eps(scenario: Scenario, out_dir: str | None = None, threads: int | None = None) -> SweepResult:
    """Run every eps in the configured list and fit convergence slopes.

    Points execute in an independent task pool; results are assembled in
    list order so the output bytes do not depend on the thread count.
    """
    cfg = scenario.config
    eps_list = [float(e) for e in cfg.eps_list]
    if len(eps_list) < 3:
        raise ConfigError([f"eps_list: a sweep needs at least 3 values, got {len(eps_list)}"])
    threads = cfg.threads if threads is None else threads
    started = time.perf_counter()

    n_steps = int(round(cfg.t_final / cfg.dt)) if cfg.t_final > 0 else 0
    _, mom0 = initial_state(scenario.init, scenario.grid)
    fields0 = MacroFields(rho0=mom0.rho, V=mom0.V.copy(), W=mom0.W.copy(), params=scenario.params)
    macro = simulate_macro(scenario, fields0, n_steps, cfg.dt)

    def one(eps: float) -> RunResult:
        sub = os.path.join(out_dir, f"eps_{eps:g}") if out_dir is not None else None
        return run_scenario(scenario, eps=eps, macro=macro, out_dir=sub)

    runs: list[RunResult] = []
    failure: Exception | None = None
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(one, eps) for eps in eps_list]
            for fut in futures:
                if failure is None:
                    try:
                        runs.append(fut.result())
                    except Exception as exc:
                        failure = exc
                else:
                    fut.cancel()
    else:
        for eps in eps_list:
            try:
                runs.append(one(eps))
            except Exception as exc:
                failure = exc
                break

    points = []
    for eps, run in zip(eps_list, runs):
        points.append(
            {
                "param_value": eps,
                "sup_rel_entropy": run.sup_rel_entropy,
                "int_var_weighted": run.int_var_weighted,
                "int_var_unweighted": run.int_var_unweighted,
                "weak_gap": max(run.weak_gaps.values()),
                "weak_gaps": dict(run.weak_gaps),
            }
        )

    slopes: dict = {}
    if len(points) >= 3:
        x = [pt["param_value"] for pt in points]
        for key in ("sup_rel_entropy", "int_var_weighted", "int_var_unweighted"):
            y = [pt[key] for pt in points]
            try:
                slopes[key] = fit_loglog_slope(x, y)
            except ValueError:
                slopes[key] = None

    result = SweepResult(
        param_name="eps",
        param_values=eps_list[: len(points)],
        points=points,
        slopes=slopes,
        runs=runs,
        aborted=failure is not None,
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_rows = []
        for i, pt in enumerate(points):
            partial = _partial_slope(
                [q["param_value"] for q in points[: i + 1]],
                [q["sup_rel_entropy"] for q in points[: i + 1]],
            )
            csv_rows.append(
                (
                    pt["param_value"],
                    pt["sup_rel_entropy"],
                    pt["int_var_weighted"],
                    pt["int_var_unweighted"],
                    pt["weak_gap"],
                    partial,
                )
            )
        write_csv(os.path.join(out_dir, "sweep.csv"), SWEEP_EPS_COLUMNS, csv_rows)
        write_manifest(
            os.path.join(out_dir, "manifest.json"),
            {
                "config": cfg.to_dict(),
                "versions": _versions(),
                "backend": backend_name(),
                "sweep": "eps",
                "seed": cfg.seed,
                "aborted": result.aborted,
                "points": points,
                "slopes": {
                    k: (None if v is None else v.__dict__) for k, v in slopes.items()
                },
                "rel_entropy_inversions": result.inversions("sup_rel_entropy"),
                "monitors_all_passed": all(r.all_monitors_passed for r in runs),
                "timings": {"total_seconds": time.perf_counter() - started},
            },
        )

    if failure is not None:
        raise RuntimeError(
            f"eps sweep aborted after {len(runs)} of {len(eps_list)} points; partial results "
            f"{'written' if out_dir else 'kept in memory'}"
        ) from failure
    return result


# ---------------------------------------------------------------------------
# network-size sweep
# ---------------------------------------------------------------------------


def micro_kernel_callable(scenario: Scenario):
    """Smooth network connectivity: the lateral kernel plus, optionally, a
    mollified local spike scaled by 1/eps."""
    cfg = scenario.config
    psi = kernel_callable(
        KernelSpec(
            shape=cfg.kernel.shape,
            amplitude=cfg.kernel.amplitude,
            length_scale=cfg.kernel.length_scale,
        )
    )
    if not cfg.micro.include_local:
        return psi
    width = cfg.micro.mollifier_width
    if width is None:
        width = 2.0 * min(scenario.grid.spacing)
    local = MollifiedDirac(width=width, profile=cfg.micro.mollifier_profile)
    inv_eps = 1.0 / cfg.micro.eps

    def phi(disp):
        return psi(disp) + inv_eps * local(disp)

    return phi


def sample_network(scenario: Scenario, n: int, rng: np.random.Generator) -> NeuronNetworkState:
    """Draw n neurons from the scenario's initial data.

    Positions follow the discretised density (i.i.d., or a deterministic
    quantile lattice in one dimension); (v, w) are uniform on the same box
    profile the particle quadrature discretises.
    """
    cfg = scenario.config
    grid = scenario.grid
    masses = scenario.rho0 * grid.cell_volume
    probs = masses / masses.sum()
    spacing = np.asarray(grid.spacing)
    centers = grid.cell_centers

    if cfg.micro.placement == "quantile":
        cdf = np.concatenate([[0.0], np.cumsum(probs)])
        cdf[-1] = 1.0
        u = (np.arange(n) + 0.5) / n
        cell = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, grid.n_cells - 1)
        frac = (u - cdf[cell]) / np.maximum(probs[cell], 1e-300)
        positions = centers[cell].copy()
        positions[:, 0] += (frac - 0.5) * spacing[0]
    else:
        cell = rng.choice(grid.n_cells, size=n, p=probs)
        offsets = (rng.random((n, grid.dim)) - 0.5) * spacing[None, :]
        positions = centers[cell] + offsets

    spread = cfg.initial.vw_spread
    v = scenario.V0[cell] + spread * (2.0 * rng.random(n) - 1.0)
    w = scenario.W0[cell] + spread * (2.0 * rng.random(n) - 1.0)
    return NeuronNetworkState(positions=positions, v=v, w=w, params=scenario.params)


def _moment_distance(emp: MacroFields, mom, vol: float) -> float:
    d0 = emp.rho0 - mom.rho
    d1 = emp.rho0 * emp.V - mom.j
    d2 = emp.rho0 * emp.W - mom.q
    return float(np.sqrt(np.sum(d0 * d0 + d1 * d1 + d2 * d2) * vol))


def _kinetic_reference(scenario: Scenario, eps: float, dt: float, n_steps: int):
    cloud, mom0 = initial_state(scenario.init, scenario.grid)
    conv_rho = convolve(scenario.kernel, mom0.rho)
    series = [mom0]
    current = cloud
    for _ in range(n_steps):
        current = kinetic_step(
            current,
            scenario.grid,
            scenario.kernel,
            dt,
            eps,
            scenario.params,
            safety_radius=scenario.init.safety_radius,
            conv_rho=conv_rho,
        )
        series.append(deposit_moments(current, scenario.grid))
    return series


def sweep_n(scenario: Scenario, out_dir: str | None = None, threads: int | None = None) -> SweepResult:
    """Network-size sweep: time-averaged moment distance between the sampled
    network and the deterministic kinetic reference, averaged over seeds."""
    cfg = scenario.config
    n_list = [int(n) for n in cfg.n_list]
    threads = cfg.threads if threads is None else threads
    started = time.perf_counter()
    dt = cfg.micro.dt
    n_steps = int(round(cfg.micro.t_final / dt))
    eps = cfg.micro.eps

    reference = _kinetic_reference(scenario, eps, dt, n_steps)
    phi = micro_kernel_callable(scenario)
    vol = scenario.grid.cell_volume

    def one_point(point_index: int, n: int):
        distances = []
        for seed_index in range(cfg.micro.n_seeds):
            rng = np.random.default_rng([cfg.seed, point_index, seed_index])
            state = sample_network(scenario, n, rng)
            coupling = pairwise_coupling(state.positions, phi)
            per_time = [_moment_distance(empirical_macro(state, scenario.grid), reference[0], vol)]
            for k in range(1, n_steps + 1):
                state = micro_step(state, coupling, dt)
                per_time.append(
                    _moment_distance(empirical_macro(state, scenario.grid), reference[k], vol)
                )
            distances.append(float(np.mean(per_time)))
        return distances

    results: list[list[float]] = [None] * len(n_list)
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(one_point, i, n): i for i, n in enumerate(n_list)}
            for fut in concurrent.futures.as_completed(futures):
                results[futures[fut]] = fut.result()
    else:
        for i, n in enumerate(n_list):
            results[i] = one_point(i, n)

    points = []
    for n, dists in zip(n_list, results):
        points.append(
            {
                "param_value": n,
                "mean_distance": float(np.mean(dists)),
                "std_distance": float(np.std(dists)),
                "per_seed": dists,
            }
        )

    slopes: dict = {}
    if len(points) >= 3:
        slopes["mean_distance"] = fit_loglog_slope(
            [pt["param_value"] for pt in points], [pt["mean_distance"] for pt in points]
        )

    result = SweepResult(
        param_name="n",
        param_values=n_list,
        points=points,
        slopes=slopes,
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_rows = []
        for i, pt in enumerate(points):
            partial = _partial_slope(
                [q["param_value"] for q in points[: i + 1]],
                [q["mean_distance"] for q in points[: i + 1]],
            )
            csv_rows.append((pt["param_value"], pt["mean_distance"], pt["std_distance"], partial))
        write_csv(os.path.join(out_dir, "sweep.csv"), SWEEP_N_COLUMNS, csv_rows)
        write_manifest(
            os.path.join(out_dir, "manifest.json"),
            {
                "config": cfg.to_dict(),
                "versions": _versions(),
                "backend": backend_name(),
                "sweep": "n",
                "seed": cfg.seed,
                "points": points,
                "slopes": {k: v.__dict__ for k, v in slopes.items()},
                "timings": {"total_seconds": time.perf_counter() - started},
            },
        )
    return result


# ---------------------------------------------------------------------------
# invariant suite (the `validate` subcommand)
# ---------------------------------------------------------------------------


def validate_invariants(scenario: Scenario) -> list[tuple[str, bool, str]]:
    """Fast invariant probes on the configured scenario; returns
    (name, passed, detail) triples."""
    grid, kernel, params = scenario.grid, scenario.kernel, scenario.params
    checks: list[tuple[str, bool, str]] = []
    rng = np.random.default_rng(scenario.config.seed)

    samples = kernel.samples
    idx = np.arange(samples.size)
    axis_idx = np.unravel_index(idx, samples.shape)
    mirror = np.ravel_multi_index(
        tuple((m - a) % m for a, m in zip(axis_idx, samples.shape)), samples.shape
    )
    sym_ok = bool(np.all(samples.ravel() == samples.ravel()[mirror]))
    checks.append(("kernel_symmetry", sym_ok, "samples equal their mirrored offsets bit for bit"))

    rho = scenario.rho0
    const = np.full(grid.n_cells, 0.7)
    from .grid import nonlocal_operator, interaction_energy

    l_const = nonlocal_operator(kernel, rho, const)
    checks.append(
        (
            "nonlocal_kills_constants",
            bool(np.all(l_const == 0.0)),
            f"max |L(const)| = {float(np.max(np.abs(l_const))):.3e}",
        )
    )

    V = scenario.V0 + 0.1 * rng.standard_normal(grid.n_cells)
    lv = nonlocal_operator(kernel, rho, V)
    scale = max(float(np.sum(np.abs(rho * lv))) * grid.cell_volume, 1e-30)
    anti = abs(float(np.sum(rho * lv) * grid.cell_volume)) / scale
    checks.append(("nonlocal_antisymmetry", anti <= 1e-12, f"relative mass defect {anti:.3e}"))

    quad = float(np.sum(rho * V * lv) * grid.cell_volume)
    snl = -0.5 * interaction_energy(kernel, rho, V)
    denom = max(abs(snl), 1e-30)
    agree = abs(quad - snl) / denom
    checks.append(
        (
            "nonlocal_dissipation_identity",
            agree <= 1e-10 and snl <= 1e-12,
            f"two-route relative difference {agree:.3e}, Snl = {snl:.3e}",
        )
    )

    cloud, mom0 = initial_state(scenario.init, grid)
    relaxed = relax_exact(cloud, mom0, 0.3, max(min(scenario.config.eps_list), 1e-6))
    j_before = np.bincount(cloud.cell, weights=cloud.weight * cloud.v, minlength=grid.n_cells)
    j_after = np.bincount(relaxed.cell, weights=relaxed.weight * relaxed.v, minlength=grid.n_cells)
    j_scale = max(float(np.max(np.abs(j_before))), 1e-30)
    j_drift = float(np.max(np.abs(j_after - j_before))) / j_scale
    checks.append(("relaxation_preserves_momentum", j_drift <= 1e-12, f"relative drift {j_drift:.3e}"))

    z0 = MacroFields(rho0=mom0.rho, V=mom0.V.copy(), W=mom0.W.copy(), params=params)
    rel0 = relative_entropy(mom0, z0, grid)
    checks.append(("well_prepared_initial_data", rel0 <= 1e-28, f"initial relative entropy {rel0:.3e}"))

    steps = min(int(round(scenario.config.t_final / scenario.config.dt)) or 0, 25)
    current = cloud
    conv_rho = convolve(kernel, mom0.rho)
    drift = 0.0
    d_min = math.inf
    for _ in range(steps):
        current = kinetic_step(
            current,
            grid,
            kernel,
            scenario.config.dt,
            scenario.config.eps,
            params,
            safety_radius=scenario.init.safety_radius,
            conv_rho=conv_rho,
        )
        mom = deposit_moments(current, grid)
        drift = max(drift, float(np.max(np.abs(mom.rho - mom0.rho))) / float(np.max(mom0.rho)))
        d_min = min(d_min, dissipation(current, mom, 1), dissipation(current, mom, 2))
    if steps:
        checks.append(("mass_and_density_constancy", drift <= 1e-12, f"max density drift {drift:.3e}"))
        checks.append(("dissipation_sign", d_min >= -1e-12, f"min dissipation {d_min:.3e}"))
    return checks
