"""coilsim: deterministic simulation and analysis of timer-based channel
access for wireless networked control loops.

Multiple LTI control loops share a pool of lossy channels. Each sensor runs
a local countdown timer per channel, inversely proportional to the loop's
cost of information loss (optionally scaled by learned link-quality
indices); the first timer to expire claims the channel without any central
coordination. The package simulates the closed loops, learns unknown
channel statistics with perturbed UCB1 indices, and certifies mean-square
stability through the stationary distribution of the induced packet-age
Markov chain.
"""

from .bandit import BanditState, algorithm1_step, reward_update, ucb_index, warmup_schedule
from .coil import coil_value, coil_vector, expected_stage_cost
from .errors import (
    AllocationError,
    CoilsimError,
    ConfigError,
    ConvergenceError,
    DegeneratePriorityError,
    DimensionError,
    InstanceTooLargeError,
    NotStabilizableError,
    SingularMatrixError,
)
from .harness import (
    RunResult,
    TraceRecord,
    compute_regret,
    config_hash,
    load_config,
    run,
    run_many,
    validate_config,
    write_summary_json,
    write_trace_csv,
)
from .mat import (
    g_map,
    h_map,
    solve_dare,
    spectral_norm,
    spectral_radius,
    steady_state_error_cov,
)
from .network import (
    Allocation,
    TransmissionOutcome,
    compute_timers,
    resolve_contention,
    transmit,
    validate_link_quality,
)
from .oracle import brute_force_assignment, hungarian, hungarian_value, miocp_enumerate
from .plant import PlantState, SubsystemModel, estimator_update, sensor_update, step
from .stability import (
    ChainModel,
    StabilityVerdict,
    build_chain,
    check_stability,
    expected_limit_covariance,
    marginal_age_distribution,
    stability_report,
    stationary_distribution,
)

__version__ = "0.1.0"
