"""Projective integration and seamless HMM for slow-fast ODE systems, with error bounds."""

from .analysis import (
    LEDGER_PRESETS,
    AssumptionReport,
    Branch,
    ConstantsLedger,
    ErrorSeries,
    check_assumptions,
    classify_branch,
    estimate_constants,
    lemma1_bound,
    lemma5_dn_bound,
    measure_errors,
    theorem1_total_bound,
    theorem2_reduction_bound,
    theorem4_discretization_bound,
)
from .core import (
    MultiscaleSystem,
    State,
    ToySystemParams,
    approx_manifold,
    eval_fast_rhs,
    eval_reduced_rhs,
    eval_slow_rhs,
    manifold_distance,
    toy_system,
    vector_norm,
)
from .errors import (
    AccuracyError,
    BoundInapplicableError,
    ContractError,
    DivergenceError,
    DomainError,
    ExperimentError,
    MultiscaleError,
    SpecError,
    StepOverflowError,
)
from .experiments import (
    PRESETS,
    ExperimentKind,
    ExperimentResult,
    ExperimentSpec,
    loglog_slope,
    parse_spec,
    run_dn_scaling,
    run_dt_scaling,
    run_eps_scaling,
    run_experiment,
)
from .integrators import (
    MicroBurst,
    Scheme,
    SchemeConfig,
    Trajectory,
    WeightVector,
    frozen_burst,
    hmm_endpoint_weights,
    hmm_macro_step,
    integrate_multiscale,
    integrate_reduced,
    integrate_reference,
    micro_burst,
    micro_step,
    pi_macro_step,
    pi_macro_step_weighted,
    pi_weights,
    shmm_macro_step,
)

__version__ = "0.1.0"

__all__ = [
    "LEDGER_PRESETS",
    "AssumptionReport",
    "Branch",
    "ConstantsLedger",
    "ErrorSeries",
    "check_assumptions",
    "classify_branch",
    "estimate_constants",
    "lemma1_bound",
    "lemma5_dn_bound",
    "measure_errors",
    "theorem1_total_bound",
    "theorem2_reduction_bound",
    "theorem4_discretization_bound",
    "MultiscaleSystem",
    "State",
    "ToySystemParams",
    "approx_manifold",
    "eval_fast_rhs",
    "eval_reduced_rhs",
    "eval_slow_rhs",
    "manifold_distance",
    "toy_system",
    "vector_norm",
    "AccuracyError",
    "BoundInapplicableError",
    "ContractError",
    "DivergenceError",
    "DomainError",
    "ExperimentError",
    "MultiscaleError",
    "SpecError",
    "StepOverflowError",
    "PRESETS",
    "ExperimentKind",
    "ExperimentResult",
    "ExperimentSpec",
    "loglog_slope",
    "parse_spec",
    "run_dn_scaling",
    "run_dt_scaling",
    "run_eps_scaling",
    "run_experiment",
    "MicroBurst",
    "Scheme",
    "SchemeConfig",
    "Trajectory",
    "WeightVector",
    "frozen_burst",
    "hmm_endpoint_weights",
    "hmm_macro_step",
    "integrate_multiscale",
    "integrate_reduced",
    "integrate_reference",
    "micro_burst",
    "micro_step",
    "pi_macro_step",
    "pi_macro_step_weighted",
    "pi_weights",
    "shmm_macro_step",
]
