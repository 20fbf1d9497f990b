"""Age-of-information scheduling over correlated sources sharing one channel.

Core objects: CorrelationMatrix / WeightVector describe an instance,
policies pick one sender per slot, the engine simulates the age process,
the solver finds the optimal stationary randomized policy, and analysis
provides matching performance bounds.
"""
from .analysis import (
    CoverResult,
    ThresholdDigraph,
    build_threshold_digraph,
    cover_bound,
    greedy_vertex_cover,
    lower_bound,
    maf_star_lower_bound,
    rgg_bound,
    uncorrelated_baseline,
)
from .dynamics import (
    BERNOULLI,
    CONSTANT,
    UNIFORM_JITTER,
    CorrelationModel,
    sample_row,
    sample_row_coupled,
    step_aoi,
)
from .engine import (
    Instance,
    MobilityConfig,
    SimConfig,
    SimReport,
    batch_means_se,
    initial_ages_vector,
    instance_from_config,
    run_simulation,
    windowed_series,
)
from .experiments import (
    PRESET_NAMES,
    ExperimentCell,
    expand_preset,
    rerun_row,
    run_experiment,
)
from .model import (
    AoiState,
    CorrelationDraw,
    CorrelationMatrix,
    PolicyDistribution,
    ScheduleDecision,
    WeightVector,
    instance_from_json,
    instance_to_json,
    load_instance,
    save_instance,
    validate_instance,
)
from .policies import (
    POLICY_KINDS,
    EmaMaxWeightPolicy,
    EmaState,
    LinearMaxWeightPolicy,
    LinearMwState,
    MaxAoiFirstPolicy,
    OracleMaxWeightPolicy,
    QuadraticMaxWeightPolicy,
    RandomizedPolicy,
    RoundRobinPolicy,
    SchedulingPolicy,
    build_policy,
    decide_ema_mw,
    decide_linear_mw,
    decide_max_aoi_first,
    decide_quadratic_mw,
    decide_randomized,
    decide_round_robin,
    ema_observe_and_update,
    linear_mw_weights,
    materialize_policy_spec,
)
from .rng import stream_rng
from .solver import (
    InfeasibleInstanceError,
    KktReport,
    SolverReport,
    check_kkt,
    eval_avg_aoi,
    objective_value,
    project_to_simplex,
    solve_optimal_randomized,
)
from .topology import (
    SourceLayout,
    TopologySpec,
    brownian_step,
    hgg_generate,
    rebuild_rgg,
    rgg_generate,
    star_matrix,
)

__version__ = "0.1.0"
