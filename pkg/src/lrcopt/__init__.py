"""Linear reservoir computers with optimized eigenvalue spectra.

The package splits into six parts: multisine task signals (signals),
reservoir topologies and their modal form (reservoir), time and
frequency domain readout training (regression), projected multi-start
spectrum optimization (optimizer), the comparison harness against
random linear and nonlinear baselines (benchmarks), and a config-driven
command line (cli).
"""

from .benchmarks import (
    METHODS,
    BenchmarkReport,
    BenchmarkSettings,
    BetaCell,
    CellStats,
    ScenarioSpec,
    SensitivityRow,
    SignalGenerator,
    TrialRecord,
    beta_weight_study,
    run_method,
    run_sweep,
    sensitivity_study,
)
from .optimizer import (
    AllRestartsFailed,
    InfeasibleLambdas,
    OptimizationResult,
    OptimizerConfig,
    TaskContext,
    cost,
    fd_gradient,
    feasible,
    harmonic_spread,
    optimize,
    perturb,
    reduced_cost_and_grad,
)
from .regression import (
    DomainComparison,
    FrequencyDesignMatrix,
    ReadoutWeights,
    ModalEquivalenceCheck,
    build_frequency_system,
    compare_readout_domains,
    frequency_design,
    frequency_fit,
    nrmse,
    ridge_fit,
    verify_modal_equivalence,
)
from .reservoir import (
    FrequencyResponse,
    ModalReservoir,
    ReservoirTopology,
    StateMatrix,
    UnstableSimulation,
    decouple,
    generate_random_topology,
    recouple,
    simulate,
    steady_state_series,
    transfer_response,
)
from .seeding import stream, substream_seed
from .signals import (
    FewerThanKCommonPeaks,
    MultiSineSignal,
    SampledSeries,
    extract_common_frequencies,
    sample,
)

__version__ = "0.1.0"

__all__ = [
    "AllRestartsFailed",
    "BenchmarkReport",
    "BenchmarkSettings",
    "BetaCell",
    "CellStats",
    "DomainComparison",
    "FewerThanKCommonPeaks",
    "FrequencyDesignMatrix",
    "FrequencyResponse",
    "InfeasibleLambdas",
    "METHODS",
    "ModalReservoir",
    "MultiSineSignal",
    "OptimizationResult",
    "OptimizerConfig",
    "ReadoutWeights",
    "ReservoirTopology",
    "SampledSeries",
    "ScenarioSpec",
    "SensitivityRow",
    "SignalGenerator",
    "StateMatrix",
    "TaskContext",
    "ModalEquivalenceCheck",
    "TrialRecord",
    "UnstableSimulation",
    "beta_weight_study",
    "build_frequency_system",
    "compare_readout_domains",
    "cost",
    "decouple",
    "extract_common_frequencies",
    "fd_gradient",
    "feasible",
    "frequency_design",
    "frequency_fit",
    "generate_random_topology",
    "harmonic_spread",
    "nrmse",
    "optimize",
    "perturb",
    "recouple",
    "reduced_cost_and_grad",
    "ridge_fit",
    "run_method",
    "run_sweep",
    "sample",
    "sensitivity_study",
    "simulate",
    "steady_state_series",
    "stream",
    "substream_seed",
    "transfer_response",
    "verify_modal_equivalence",
]
