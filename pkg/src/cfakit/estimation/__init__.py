"""Estimators for TV-family measures from observational data."""
from .bootstrap import bootstrap_ci, bootstrap_many, bootstrap_replicates
from .core import (
    EmptyCellError,
    EstimationError,
    Estimator,
    EstimatorConfig,
    MeasureEstimate,
    NotIdentifiableError,
    check_estimable,
    estimate_measure,
    estimate_measures,
    measure_terms,
)
from .nuisance import FitWarning, fit_logistic, fit_regression
from .plugin import obs_de, plugin_discrete, plugin_discrete_many

__all__ = [
    "EmptyCellError", "EstimationError", "Estimator", "EstimatorConfig", "MeasureEstimate",
    "NotIdentifiableError", "check_estimable", "estimate_measure", "estimate_measures",
    "measure_terms", "FitWarning", "fit_logistic", "fit_regression", "obs_de",
    "plugin_discrete", "plugin_discrete_many", "bootstrap_ci", "bootstrap_many", "bootstrap_replicates",
]
