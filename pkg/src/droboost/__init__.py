"""Boosting that minimises the worst-case expected loss over a KL ball."""

__version__ = "0.1.0"

from .adaboost import train_adaboost
from .boost import TrainConfig, TrainTrace, adaboost_delta, line_search, robust_gradient, train
from .calibrate import CalibrationSpec, chi2_quantile, epl_value, select_delta
from .core import (
    DataError,
    Dataset,
    DimensionError,
    DroBoostError,
    Ensemble,
    LossSpec,
    SolverError,
    evaluate_margins,
    inner_product,
    loss_vector,
)
from .data import Schema, SplitSpec, load_csv, split
from .learners import Tree, TreeConfig, fit_projection, predict
from .worstcase import WorstCase, kl_divergence, psi, solve_worst_case

__all__ = [
    "CalibrationSpec", "DataError", "Dataset", "DimensionError", "DroBoostError", "Ensemble", "LossSpec",
    "Schema", "SolverError", "SplitSpec", "TrainConfig", "TrainTrace", "Tree", "TreeConfig", "WorstCase",
    "adaboost_delta", "chi2_quantile", "epl_value", "evaluate_margins", "fit_projection", "inner_product",
    "kl_divergence", "line_search", "load_csv", "loss_vector", "predict", "psi", "robust_gradient",
    "select_delta", "solve_worst_case", "split", "train", "train_adaboost",
]
