"""Temporal density extrapolation for univariate data streams.

Fits a Gaussian basis expansion whose mixture weights follow a polynomial
trajectory in isometric log-ratio coordinates, so the density can be
forecast at times after the training window. The package also contains
the tools to evaluate such forecasts: drifting synthetic streams, a
smoothed-histogram reference density, MAE and signed-rank scoring, and
hyperparameter search.
"""

from .baseline import baseline_density, sturges_bins, windowed_baseline
from .basis import BasisSet, build_basis, eval_basis, eval_basis_matrix
from .compositional import IlrBasis, build_ilr_basis, ilr_forward, ilr_inverse
from .curve import DensityCurve, read_curve_csv, write_curve_csv
from .datagen import (
    DriftScenario,
    Stream,
    default_scenario,
    generate_stream,
    load_scenario,
    read_stream_csv,
    sample_from_model,
    write_stream_csv,
)
from .errors import (
    FitError,
    InsufficientDataError,
    NumericalError,
    TdxError,
    ValidationError,
)
from .evaluation import (
    ExperimentPlan,
    LatencyCurve,
    mae,
    run_experiment,
    wilcoxon_signed_rank,
)
from .model import TdxModel, density_at, density_curve, load_model, save_model
from .modelselect import SearchSpace, select_hyperparams, sensitivity_sweep
from .objective import Hyperparams, make_fit_data, objective_and_gradient
from .optimizer import FitReport, SolverConfig, fit_static, fit_window, multistart_fit

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "DensityCurve",
    "DriftScenario",
    "ExperimentPlan",
    "FitError",
    "FitReport",
    "Hyperparams",
    "IlrBasis",
    "InsufficientDataError",
    "LatencyCurve",
    "NumericalError",
    "SearchSpace",
    "SolverConfig",
    "Stream",
    "TdxError",
    "TdxModel",
    "ValidationError",
    "baseline_density",
    "build_basis",
    "build_ilr_basis",
    "default_scenario",
    "density_at",
    "density_curve",
    "eval_basis",
    "eval_basis_matrix",
    "fit_static",
    "fit_window",
    "generate_stream",
    "ilr_forward",
    "ilr_inverse",
    "load_model",
    "load_scenario",
    "mae",
    "make_fit_data",
    "multistart_fit",
    "objective_and_gradient",
    "read_curve_csv",
    "read_stream_csv",
    "run_experiment",
    "sample_from_model",
    "save_model",
    "select_hyperparams",
    "sensitivity_sweep",
    "sturges_bins",
    "wilcoxon_signed_rank",
    "windowed_baseline",
    "write_curve_csv",
    "write_stream_csv",
]
