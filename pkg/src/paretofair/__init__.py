"""Pareto descent and preference-steered frontier tracing for fair classification."""

__version__ = "0.1.0"

from .errors import ConfigurationError, DataError, NumericError, ParetoFairError, UsageError
from .fairness import LinearModelSpec, build_objectives, evaluate_metrics
from .frontier import dominates, merge_runs, non_dominated_filter
from .objectives import ObjectiveBundle, make_gaussian_pair
from .pbpdo import PbpdoConfig, PreferenceVector, run_pbpdo
from .pdo import PdoConfig, run_pdo
from .simplex import project_simplex, solve_inner

__all__ = [
    "ConfigurationError", "DataError", "NumericError", "ParetoFairError", "UsageError",
    "LinearModelSpec", "build_objectives", "evaluate_metrics",
    "dominates", "merge_runs", "non_dominated_filter",
    "ObjectiveBundle", "make_gaussian_pair",
    "PbpdoConfig", "PreferenceVector", "run_pbpdo",
    "PdoConfig", "run_pdo",
    "project_simplex", "solve_inner",
]
