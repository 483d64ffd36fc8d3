"""Joint remote-antenna-port selection and block-diagonalization precoding.

Simulates a downlink network of distributed multi-antenna ports serving
multiple users over one fronthaul pool, and solves for which ports to keep
active and how to precode on them: a reweighted group-sparsity penalty on
per-port powers is folded into the rate objective, the inner precoding
problem is solved in closed form, and per-port power constraints are
enforced through projected subgradient steps on their multipliers. A
certified exhaustive search over port subsets serves as ground truth.
"""

from .model import (
    SystemConfig, Layout, ChannelRealization,
    path_loss_db, large_scale_gain, generate_layout, sample_channel,
    realization,
)
from .bd import (
    NullBasis, EffectiveChannel, compute_null_basis, effective_channel,
    waterfill_dual, covariance_from_dual, sum_rate, per_rap_powers,
    embed_covariance,
)
from .solver import (
    SolverParams, DualState, PrecoderSolution,
    update_weights, build_psi, inner_solve, subgradient_step,
    slackness_residual, extract_active_set, solve,
)
from .oracle import (
    SubsetResult, FeasibilityError, restrict_channels, subset_feasible,
    solve_fixed_subset, exhaustive_search, projected_gradient_reference,
    golden_section_waterfill,
)
from .cli import (
    ExperimentConfig, TradeoffPoint, load_config, eta_for_target_active,
    tradeoff_sweep, bench_scaling,
)

__version__ = "0.1.0"

__all__ = [
    "SystemConfig", "Layout", "ChannelRealization", "path_loss_db",
    "large_scale_gain", "generate_layout", "sample_channel", "realization",
    "NullBasis", "EffectiveChannel", "compute_null_basis",
    "effective_channel", "waterfill_dual", "covariance_from_dual",
    "sum_rate", "per_rap_powers", "embed_covariance",
    "SolverParams", "DualState", "PrecoderSolution", "update_weights",
    "build_psi", "inner_solve", "subgradient_step", "slackness_residual",
    "extract_active_set", "solve",
    "SubsetResult", "FeasibilityError", "restrict_channels",
    "subset_feasible", "solve_fixed_subset", "exhaustive_search",
    "projected_gradient_reference", "golden_section_waterfill",
    "ExperimentConfig", "TradeoffPoint", "load_config",
    "eta_for_target_active", "tradeoff_sweep", "bench_scaling",
    "__version__",
]
