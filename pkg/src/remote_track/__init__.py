"""Remote reconstruction of an N-state Markov source over an erasure channel."""

from .analytics import (
    ConsecutiveChain,
    ErrorChain,
    JointStationary,
    OptimizationResult,
    StationaryDistribution,
    actuation_cost,
    avg_consecutive_error,
    build_error_chain,
    consecutive_from_chain,
    consecutive_stationary,
    joint_stationary,
    memory_cost,
    optimize_rs,
    p_error_policy,
    p_error_rs,
    rs_vs_ca_threshold,
    stationary,
    variance,
)
from .policies import NoClosedForm, Policy, PolicyConfig, PolicyContext, decide_sample, sampling_rate
from .process import (
    ChannelModel,
    CostMatrix,
    SourceModel,
    SystemState,
    channel_outcome,
    source_step,
    success_probability,
)
from .simulator import MetricsReport, SimulationConfig, estimate_consecutive_params, estimate_error_chain, run

__version__ = "0.1.0"
