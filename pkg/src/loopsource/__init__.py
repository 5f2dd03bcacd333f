"""Simulation and optimization toolkit for a fibre-loop multiplexed
heralded single-photon source."""

from .models import (
    ConstantPump,
    DetectorKind,
    DetectorModel,
    DetectorOutcome,
    LossModel,
    OutcomeDistribution,
    PerBinPump,
    ProtocolConfig,
    SourceModel,
    UndefinedConditionalError,
    detect_prob,
    herald_outcome,
    loss_thinning_pmf,
    thermal_pmf,
    thermal_truncation,
    transmission,
)
from .analytic import (
    FidelityReport,
    HeraldStats,
    conditional_fidelity,
    detector_limited_fidelity,
    detector_limited_fidelity_oracle,
    fidelity_after_loops,
    fidelity_after_loops_oracle,
    fidelity_report,
    herald_single_shot,
    herald_single_shot_oracle,
    herald_stats,
    herald_train,
    large_nbar_asymptote,
    outcome_distribution,
    prep_pmf,
    prep_pmf_oracle,
    unconditional_fidelity,
)
from .montecarlo import (
    Estimate,
    SimulationSummary,
    TrialOutcome,
    draws_per_trial,
    run_simulation,
    simulate_parallel_sources,
    simulate_trial,
    trial_stream,
)
from .multiplex import (
    Objective,
    OptimizationResult,
    ParallelDistribution,
    m_source_distribution,
    m_source_distribution_oracle,
    optimize_constant,
    optimize_schedule,
    parallel_unconditional_fidelity,
    two_source_distribution,
)

__version__ = "0.1.0"

__all__ = [
    "ConstantPump",
    "DetectorKind",
    "DetectorModel",
    "DetectorOutcome",
    "Estimate",
    "FidelityReport",
    "HeraldStats",
    "LossModel",
    "Objective",
    "OptimizationResult",
    "OutcomeDistribution",
    "ParallelDistribution",
    "PerBinPump",
    "ProtocolConfig",
    "SimulationSummary",
    "SourceModel",
    "TrialOutcome",
    "UndefinedConditionalError",
    "conditional_fidelity",
    "detect_prob",
    "detector_limited_fidelity",
    "detector_limited_fidelity_oracle",
    "draws_per_trial",
    "fidelity_after_loops",
    "fidelity_after_loops_oracle",
    "fidelity_report",
    "herald_outcome",
    "herald_single_shot",
    "herald_single_shot_oracle",
    "herald_stats",
    "herald_train",
    "large_nbar_asymptote",
    "loss_thinning_pmf",
    "m_source_distribution",
    "m_source_distribution_oracle",
    "optimize_constant",
    "optimize_schedule",
    "outcome_distribution",
    "parallel_unconditional_fidelity",
    "prep_pmf",
    "prep_pmf_oracle",
    "run_simulation",
    "simulate_parallel_sources",
    "simulate_trial",
    "thermal_pmf",
    "thermal_truncation",
    "transmission",
    "trial_stream",
    "two_source_distribution",
    "unconditional_fidelity",
    "__version__",
]
