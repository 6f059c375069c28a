"""Multiscale FitzHugh-Nagumo simulation and verification suite."""

__version__ = "0.1.0"

from .backend import NUMBA_ENABLED, backend_name
from .errors import (
    BlowupError,
    ConfigError,
    InvariantViolation,
    KernelResolutionError,
    TrajectoryGapError,
)
from .fhn import FHNParams, adaptation_rate, cubic_reaction
from .grid import (
    DiscreteKernel,
    KernelSpec,
    SpatialGrid,
    build_kernel,
    convolve,
    interaction_energy,
    kernel_callable,
    nonlocal_operator,
)
from .kinetic import (
    CellMoments,
    InitialDataSpec,
    ParticleCloud,
    characteristic_rhs,
    deposit_moments,
    initial_state,
    kinetic_step,
    relax_exact,
    sample_initial,
    support_radius,
)
from .macro import (
    AdaptationCloud,
    FieldTrajectory,
    MacroFields,
    advect_F,
    consistency_W,
    macro_rhs,
    macro_step,
)
from .micro import (
    MollifiedDirac,
    NeuronNetworkState,
    empirical_macro,
    micro_rhs,
    micro_step,
    pairwise_coupling,
)
from .diagnostics import (
    EntropyRecord,
    MomentRecord,
    dissipation,
    entropy,
    entropy_balance_residual,
    error_term,
    moment_inequality_residual,
    moments,
    relative_entropy,
    remainder_terms,
    velocity_variance,
    weak_convergence_gap,
)
from .scenario import ScenarioConfig, build_scenario, parse_config
from .harness import RunResult, SweepResult, fit_loglog_slope, run_scenario, sweep_eps, sweep_n
