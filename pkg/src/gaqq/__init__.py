"""Joint Gaussian modelling of a quantitative and a qualitative response.

The main entry points are :func:`fit` / :func:`tune` for estimation,
:func:`predict_batch` for prediction and :func:`run_benchmark` for simulated
comparisons against a pseudo-inverse discriminant baseline.
"""
__version__ = "0.1.0"

from .estimator import Dataset, Hyperparams, ModelParams, bic, fit, fit_multi_class, fit_two_class, tune
from .exceptions import (
    BenchmarkFailed, GAQQError, InvalidInput, NotPositiveDefinite, NotPositiveSemiDefinite,
    ParseError, SchemaError, TuningFailed, UnsupportedVersion,
)
from .fileio import DataSchema, load_csv, load_model, save_model
from .glasso import solve_glasso
from .lasso import solve_lasso
from .predictor import glda_baseline, predict, predict_batch
from .simulation import ScenarioSpec, run_benchmark, scenario_preset

__all__ = [
    "BenchmarkFailed", "DataSchema", "Dataset", "GAQQError", "Hyperparams", "InvalidInput",
    "ModelParams", "NotPositiveDefinite", "NotPositiveSemiDefinite", "ParseError",
    "ScenarioSpec", "SchemaError", "TuningFailed", "UnsupportedVersion", "bic", "fit",
    "fit_multi_class", "fit_two_class", "glda_baseline", "load_csv", "load_model", "predict",
    "predict_batch", "run_benchmark", "save_model", "scenario_preset", "solve_glasso",
    "solve_lasso", "tune",
]
