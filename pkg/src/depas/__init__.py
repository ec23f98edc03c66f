"""Decentralized probabilistic auto-scaling: analysis, tuning and simulation."""

from depas.errors import DepasError, DomainError, InfeasibleError, TraceError, UsageError
from depas.probability import (
    CorrectnessEvaluation,
    RescaledPoint,
    ScalingPolicy,
    binomial_correctness,
    bound_b1,
    bound_b2,
    chebyshev_min_n,
    correctness_probability,
    evaluate_correctness,
    feasibility_g,
    kl_divergence,
    n2_explicit,
    optimal_added_nodes,
    probability_indicator,
    scaling_probability,
    threshold_h1,
    threshold_h2,
    threshold_h3,
)
from depas.tuning import (
    TuningRequest,
    TuningResult,
    binomial_min_delta,
    binomial_min_n,
    chernoff_min_delta,
    chernoff_min_n,
    tune,
)
from depas.simulator import (
    CycleOutcome,
    SimulationReport,
    SystemState,
    WorkloadTrace,
    estimate_correctness,
    node_decision,
    run_cycle,
    run_workload,
)

__version__ = "0.1.0"
