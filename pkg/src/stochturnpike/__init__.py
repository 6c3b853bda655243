"""Stochastic linear-quadratic turnpike toolkit.

Constructs stationary pairs and storage functions for discrete-time
stochastic LQ optimal control problems, solves the finite-horizon
problem exactly through moment propagation, and certifies mean-square,
pathwise-in-probability, Wasserstein, and moment turnpike behavior.
"""

from .cli import ExperimentConfig, benchmark_problem
from .dissipativity import ProbeSpec, deterministic_degeneration_check, run_probes
from .linalg import (
    KktSolution,
    find_storage_shape,
    solve_dare,
    solve_discrete_lyapunov,
    solve_equality_qp,
    spectral_radius,
    sqrtm_psd,
)
from .metrics import (
    TurnpikeReport,
    mean_square_distance,
    stationary_convergence,
    turnpike_counters,
    wasserstein2_gaussian,
)
from .model import (
    CostSpec,
    MomentState,
    NoiseSpec,
    ProblemSpec,
    SystemSpec,
    shift_problem,
    stage_cost_from_moments,
    validate,
)
from .montecarlo import (
    PathBundle,
    RngStream,
    empirical_exceedance,
    replay_paths,
    sample_noise,
    simulate_coupled,
)
from .ocp import (
    AffinePolicy,
    MomentTrajectory,
    cost_of,
    near_optimal_policy,
    propagate_moments,
    rotated_cost,
    solve_ocp,
)
from .stationary import (
    StationaryPair,
    StorageData,
    build_stationary_pair,
    build_storage,
    dissipativity_residual,
    eval_storage,
    storage_lower_bound,
)
from .statopt import (
    AffineFeedback,
    StationaryCandidate,
    solve_stationary_problem,
    stationary_cost,
    verify_uniqueness,
)

__version__ = "0.1.0"
