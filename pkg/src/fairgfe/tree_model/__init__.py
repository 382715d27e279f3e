"""Regression trees, ensembles, trainers and the fairness post-processor."""

from .gfe import ConstraintSummary, GfeReport, GroupSummary, apply_gfe
from .persistence import load_model, save_model
from .training import CartParams, train_boosted, train_cart, train_forest
from .tree import DecisionTree, Ensemble, assign_leaf, predict

__all__ = [
    "CartParams",
    "ConstraintSummary",
    "DecisionTree",
    "Ensemble",
    "GfeReport",
    "GroupSummary",
    "apply_gfe",
    "assign_leaf",
    "load_model",
    "predict",
    "save_model",
    "train_boosted",
    "train_cart",
    "train_forest",
]
