"""Scenario configuration: JSON parsing, validation, profile discretisation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .fhn import FHNParams
from .grid import (
    KERNEL_SHAPES,
    MASS_FLOOR,
    DiscreteKernel,
    KernelSpec,
    SpatialGrid,
    build_kernel,
)
from .kinetic import InitialDataSpec
from .micro import micro_dt_cap

PROFILE_KINDS = ("gaussian", "constant", "zero")


@dataclass
class GridConfig:
    dim: int = 1
    box_length: float | list = 8.0
    cells: int | list = 64


@dataclass
class KernelConfig:
    shape: str = "gaussian"
    amplitude: float = 1.0
    length_scale: float = 1.0


@dataclass
class ParamsConfig:
    tau: float = 0.2
    a: float = 0.1
    b: float = 0.5


@dataclass
class ProfileConfig:
    profile: str = "gaussian"
    amplitude: float = 1.0
    center: float | list = 0.0
    width: float = 1.0
    value: float = 0.0
    mass: float = 1.0  # only meaningful for the density profile


@dataclass
class InitialConfig:
    vw_spread: float = 0.25
    particles_per_cell_axis: int = 4
    safety_radius: float = 40.0


@dataclass
class MicroConfig:
    """Settings of the network-vs-kinetic comparison sweep."""

    placement: str = "iid"  # or "quantile" (1-d only)
    include_local: bool = True
    mollifier_width: float | None = None  # defaults to two cell spacings
    mollifier_profile: str = "triangle"
    eps: float = 0.5
    t_final: float = 1.0
    dt: float = 0.02
    n_seeds: int = 8


@dataclass
class ScenarioConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    rho0: ProfileConfig = field(default_factory=lambda: ProfileConfig(profile="gaussian", center=0.0, width=1.0))
    V0: ProfileConfig = field(default_factory=lambda: ProfileConfig(profile="gaussian", amplitude=0.5, center=0.0, width=1.5))
    W0: ProfileConfig = field(default_factory=lambda: ProfileConfig(profile="constant", value=0.0))
    initial: InitialConfig = field(default_factory=InitialConfig)
    micro: MicroConfig = field(default_factory=MicroConfig)
    t_final: float = 2.0
    dt: float = 0.005
    eps: float = 0.05
    eps_list: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    n_list: list = field(default_factory=lambda: [250, 1000, 4000])
    seed: int = 20260808
    out_dir: str = "out"
    record_stride: int = 1
    dump_particles: bool = False
    threads: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "grid": GridConfig,
    "kernel": KernelConfig,
    "params": ParamsConfig,
    "rho0": ProfileConfig,
    "V0": ProfileConfig,
    "W0": ProfileConfig,
    "initial": InitialConfig,
    "micro": MicroConfig,
}


def _fill_section(cls, data, prefix, errors):
    obj = cls()
    if not isinstance(data, dict):
        errors.append(f"{prefix}: expected an object, got {type(data).__name__}")
        return obj
    allowed = set(obj.__dataclass_fields__)
    for key, value in data.items():
        if key not in allowed:
            errors.append(f"{prefix}.{key}: unknown key")
            continue
        setattr(obj, key, value)
    return obj


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a configuration from parsed JSON, collecting every error."""
    errors: list[str] = []
    cfg = ScenarioConfig()
    if not isinstance(data, dict):
        raise ConfigError(["top level: expected a JSON object"])
    allowed = set(cfg.__dataclass_fields__)
    for key, value in data.items():
        if key not in allowed:
            errors.append(f"{key}: unknown key")
            continue
        if key in _SECTIONS:
            setattr(cfg, key, _fill_section(_SECTIONS[key], value, key, errors))
        else:
            setattr(cfg, key, value)
    errors.extend(validate_config(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config(path: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario file; unknown keys are errors."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    return config_from_dict(data)


def _check_profile(cfg: ProfileConfig, name: str, errors: list, density: bool) -> None:
    if cfg.profile not in PROFILE_KINDS:
        errors.append(f"{name}.profile: must be one of {PROFILE_KINDS}, got {cfg.profile!r}")
        return
    if cfg.profile == "gaussian" and cfg.width <= 0:
        errors.append(f"{name}.width: must be positive, got {cfg.width}")
    if density:
        if cfg.profile == "zero":
            errors.append(f"{name}.profile: the density profile cannot be zero")
        if abs(cfg.mass - 1.0) > 1e-10:
            errors.append(
                f"{name}.mass: the density is normalised to total mass 1, got {cfg.mass}"
            )
        if cfg.profile == "constant" and cfg.value <= 0:
            errors.append(f"{name}.value: constant density must be positive, got {cfg.value}")
        if cfg.profile == "gaussian" and cfg.amplitude <= 0:
            errors.append(f"{name}.amplitude: must be positive, got {cfg.amplitude}")


def _profile_sup(cfg: ProfileConfig) -> float:
    if cfg.profile == "gaussian":
        return abs(cfg.amplitude)
    if cfg.profile == "constant":
        return abs(cfg.value)
    return 0.0


def validate_config(cfg: ScenarioConfig) -> list[str]:
    errors: list[str] = []
    if cfg.grid.dim not in (1, 2):
        errors.append(f"grid.dim: must be 1 or 2, got {cfg.grid.dim}")
    if cfg.kernel.shape not in KERNEL_SHAPES:
        errors.append(f"kernel.shape: must be one of {KERNEL_SHAPES}, got {cfg.kernel.shape!r}")
    if cfg.kernel.amplitude < 0:
        errors.append(f"kernel.amplitude: must be nonnegative, got {cfg.kernel.amplitude}")
    if cfg.kernel.length_scale <= 0:
        errors.append(f"kernel.length_scale: must be positive, got {cfg.kernel.length_scale}")
    if cfg.params.tau < 0:
        errors.append(f"params.tau: must be nonnegative, got {cfg.params.tau}")
    if cfg.params.b < 0:
        errors.append(f"params.b: must be nonnegative, got {cfg.params.b}")
    _check_profile(cfg.rho0, "rho0", errors, density=True)
    _check_profile(cfg.V0, "V0", errors, density=False)
    _check_profile(cfg.W0, "W0", errors, density=False)
    if cfg.initial.vw_spread < 0:
        errors.append(f"initial.vw_spread: must be nonnegative, got {cfg.initial.vw_spread}")
    if cfg.initial.particles_per_cell_axis < 1:
        errors.append("initial.particles_per_cell_axis: must be at least 1")
    if cfg.initial.safety_radius <= 0:
        errors.append("initial.safety_radius: must be positive")
    if cfg.t_final < 0:
        errors.append(f"t_final: must be nonnegative, got {cfg.t_final}")
    if cfg.dt <= 0:
        errors.append(f"dt: must be positive, got {cfg.dt}")
    else:
        if cfg.t_final > 0:
            steps = round(cfg.t_final / cfg.dt)
            if steps < 1 or abs(steps * cfg.dt - cfg.t_final) > 1e-9 * max(1.0, cfg.t_final):
                errors.append(f"dt: t_final {cfg.t_final} is not a whole number of steps of {cfg.dt}")
        cap = micro_dt_cap(np.array([_profile_sup(cfg.V0)]))
        if cfg.dt > cap:
            errors.append(
                f"dt: {cfg.dt} exceeds the stability cap {cap:g} set by the initial potentials"
            )
    if cfg.eps <= 0:
        errors.append(f"eps: must be positive, got {cfg.eps}")
    if not cfg.eps_list or any(e <= 0 for e in cfg.eps_list):
        errors.append(f"eps_list: entries must be positive, got {cfg.eps_list}")
    if not cfg.n_list or any(int(n) < 1 for n in cfg.n_list):
        errors.append(f"n_list: entries must be positive integers, got {cfg.n_list}")
    if cfg.record_stride < 1:
        errors.append("record_stride: must be at least 1")
    if cfg.threads < 1:
        errors.append("threads: must be at least 1")
    if cfg.micro.placement not in ("iid", "quantile"):
        errors.append(f"micro.placement: must be 'iid' or 'quantile', got {cfg.micro.placement!r}")
    if cfg.micro.placement == "quantile" and cfg.grid.dim != 1:
        errors.append("micro.placement: 'quantile' placement is available in one dimension only")
    if cfg.micro.eps <= 0:
        errors.append(f"micro.eps: must be positive, got {cfg.micro.eps}")
    if cfg.micro.dt <= 0 or cfg.micro.t_final <= 0:
        errors.append("micro.dt and micro.t_final must be positive")
    if cfg.micro.n_seeds < 1:
        errors.append("micro.n_seeds: must be at least 1")
    if cfg.micro.mollifier_profile not in ("triangle", "gaussian"):
        errors.append(
            f"micro.mollifier_profile: must be 'triangle' or 'gaussian', got {cfg.micro.mollifier_profile!r}"
        )
    return errors


@dataclass
class Scenario:
    """Fully discretised scenario: grid, kernel and per-cell initial data."""

    config: ScenarioConfig
    grid: SpatialGrid
    kernel: DiscreteKernel
    params: FHNParams
    rho0: np.ndarray
    V0: np.ndarray
    W0: np.ndarray
    init: InitialDataSpec


def evaluate_profile(cfg: ProfileConfig, grid: SpatialGrid) -> np.ndarray:
    centers = grid.cell_centers
    if cfg.profile == "zero":
        return np.zeros(grid.n_cells)
    if cfg.profile == "constant":
        return np.full(grid.n_cells, float(cfg.value))
    center = np.asarray(cfg.center, dtype=float).reshape(-1)
    if center.size == 1 and grid.dim > 1:
        center = np.repeat(center, grid.dim)
    if center.size != grid.dim:
        raise ConfigError([f"profile center must have {grid.dim} components"])
    d2 = np.sum((centers - center[None, :]) ** 2, axis=1)
    return cfg.amplitude * np.exp(-0.5 * d2 / cfg.width**2)


def build_density(cfg: ProfileConfig, grid: SpatialGrid) -> np.ndarray:
    """Discretise the density profile and normalise it to total mass one."""
    shape = evaluate_profile(cfg, grid)
    total = float(shape.sum() * grid.cell_volume)
    if total <= 0:
        raise ConfigError(["rho0: the discretised density has no mass"])
    return shape / total


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    grid = SpatialGrid(dim=cfg.grid.dim, box_length=cfg.grid.box_length, cells_per_axis=cfg.grid.cells)
    kernel = build_kernel(
        grid,
        KernelSpec(
            shape=cfg.kernel.shape,
            amplitude=cfg.kernel.amplitude,
            length_scale=cfg.kernel.length_scale,
        ),
    )
    params = FHNParams(tau=cfg.params.tau, a=cfg.params.a, b=cfg.params.b)
    rho0 = build_density(cfg.rho0, grid)
    support = rho0 > MASS_FLOOR
    V0 = np.where(support, evaluate_profile(cfg.V0, grid), 0.0)
    W0 = np.where(support, evaluate_profile(cfg.W0, grid), 0.0)
    init = InitialDataSpec(
        rho0=rho0,
        V0=V0,
        W0=W0,
        vw_spread=cfg.initial.vw_spread,
        particles_per_cell_axis=cfg.initial.particles_per_cell_axis,
        safety_radius=cfg.initial.safety_radius,
    )
    return Scenario(
        config=cfg,
        grid=grid,
        kernel=kernel,
        params=params,
        rho0=rho0,
        V0=V0,
        W0=W0,
        init=init,
    )
