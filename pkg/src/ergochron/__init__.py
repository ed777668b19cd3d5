"""Ergodization-time estimation for chaotic discrete Gross-Pitaevskii
lattices: Loschmidt-echo ensembles, tangent-space Lyapunov analysis, and the
fluctuation relations connecting the two."""

from .lattice import LatticeSpec, NeighborTable, build_neighbor_table
from .dynamics import (
    DEFAULT_DT,
    ConservedReport,
    FieldState,
    ModelParams,
    Propagator,
    TrajectorySamples,
    energy,
    evolve,
    measure,
    particle_number,
    propagator_for,
    reverse_params,
    step_rk4,
    step_split,
)
from .echo import (
    EchoProtocol,
    EchoRecord,
    initial_state,
    perturb,
    run_echo,
    run_echo_block,
    shell_state,
)
from .lyapunov import (
    DEFAULT_DT_R,
    LyapunovSummary,
    StretchSeries,
    TailConvergenceError,
    TauErgResult,
    autocorrelation,
    autocorrelation_pooled,
    benettin_rates,
    lambda_max,
    lyapunov_summary,
    stretching_ensemble,
    stretching_rates,
    tangent_step,
    tau_erg_eq4,
    tau_erg_integral,
    variance_dlambda,
)
from .analysis import (
    EnsembleStats,
    ErgodizationReport,
    FitResult,
    FitWindowError,
    VarianceRatioCurve,
    WindowPolicy,
    aggregate,
    anderson_weiss_check,
    ergodic_verdict,
    ergodization_report,
    fit_growth,
    gaussianity_check,
    tau_erg_eq9,
    tau_erg_eq11,
    var_empirical_eq10,
    variance_ratio_curve,
)
from .runner import RunConfig, analyze, derive_seed, load_config, reproduce, run_ensemble

__all__ = [
    "DEFAULT_DT",
    "DEFAULT_DT_R",
    "ConservedReport",
    "EchoProtocol",
    "EchoRecord",
    "EnsembleStats",
    "ErgodizationReport",
    "FieldState",
    "FitResult",
    "FitWindowError",
    "LatticeSpec",
    "LyapunovSummary",
    "ModelParams",
    "NeighborTable",
    "Propagator",
    "RunConfig",
    "StretchSeries",
    "TailConvergenceError",
    "TauErgResult",
    "TrajectorySamples",
    "VarianceRatioCurve",
    "WindowPolicy",
    "aggregate",
    "analyze",
    "anderson_weiss_check",
    "autocorrelation",
    "autocorrelation_pooled",
    "benettin_rates",
    "build_neighbor_table",
    "derive_seed",
    "energy",
    "ergodic_verdict",
    "ergodization_report",
    "evolve",
    "fit_growth",
    "gaussianity_check",
    "initial_state",
    "lambda_max",
    "load_config",
    "lyapunov_summary",
    "measure",
    "particle_number",
    "perturb",
    "propagator_for",
    "reproduce",
    "reverse_params",
    "run_echo",
    "run_echo_block",
    "run_ensemble",
    "shell_state",
    "step_rk4",
    "step_split",
    "stretching_ensemble",
    "stretching_rates",
    "tangent_step",
    "tau_erg_eq4",
    "tau_erg_eq9",
    "tau_erg_eq11",
    "tau_erg_integral",
    "var_empirical_eq10",
    "variance_dlambda",
    "variance_ratio_curve",
]
