"""Quasi-likelihood inference for affine causal time-series models.

Estimation (Gaussian QMLE), penalized model selection and portmanteau
goodness-of-fit diagnostics for AR, ARMA, ARCH, GARCH, APARCH, ARMA-GARCH
and AR-ARCH(inf) families, plus a seeded Monte Carlo experiment harness.
"""

from .diagnostics import (
    DiagnosticsError,
    PortmanteauReport,
    chi2_sf,
    portmanteau,
    portmanteau_arch,
    squared_residual_correlogram,
)
from .estimation import (
    FitError,
    FitResult,
    OptimizerOptions,
    attach_covariance,
    fit_qmle,
    score_and_curvature,
)
from .estimators import PenalizedSelector, QmleEstimator
from .families import (
    ModelFamily,
    ModelSpec,
    ParamVector,
    SimulationError,
    TimeSeries,
    simulate,
    validate_params,
)
from .harness import (
    ExperimentConfig,
    McReport,
    PipelineReport,
    emit_report,
    load_report,
    load_returns,
    run_pipeline,
    run_selection_experiment,
    run_size_power_experiment,
)
from .likelihood import conditional_moments, quasi_loglik, residuals
from .selection import (
    Penalty,
    SelectionReport,
    ar_archinf_grid,
    ar_subset_family,
    arma_garch_grid,
    classify,
    criterion,
    enumerate_candidates,
    fit_candidates,
    garch_grid,
    rank_candidates,
    select,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ModelFamily",
    "ModelSpec",
    "ParamVector",
    "TimeSeries",
    "SimulationError",
    "simulate",
    "validate_params",
    "conditional_moments",
    "quasi_loglik",
    "residuals",
    "OptimizerOptions",
    "FitResult",
    "FitError",
    "fit_qmle",
    "attach_covariance",
    "score_and_curvature",
    "Penalty",
    "criterion",
    "SelectionReport",
    "select",
    "fit_candidates",
    "rank_candidates",
    "classify",
    "enumerate_candidates",
    "arma_garch_grid",
    "garch_grid",
    "ar_subset_family",
    "ar_archinf_grid",
    "PortmanteauReport",
    "DiagnosticsError",
    "portmanteau",
    "portmanteau_arch",
    "squared_residual_correlogram",
    "chi2_sf",
    "QmleEstimator",
    "PenalizedSelector",
    "ExperimentConfig",
    "McReport",
    "PipelineReport",
    "run_selection_experiment",
    "run_size_power_experiment",
    "run_pipeline",
    "load_returns",
    "emit_report",
    "load_report",
]
