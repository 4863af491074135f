"""Baseline predictors: nearest neighbor, random-feature ridge regression, MLP."""

from .checkpoint import load_model, models_equal, save_model
from .data import TaskKind, training_pairs
from .knn import KnnModel, knn_fit, knn_predict
from .mlp import (
    NAMED_ARCHITECTURES,
    Adam,
    MlpModel,
    Sgd,
    TrainConfig,
    default_learning_rate,
    mlp_forward,
    mlp_gradients,
    mlp_train,
    mlp_train_arrays,
    parse_architecture,
)
from .random_features import RandomFeatureModel, default_ridge, rf_features, rf_fit, rf_fit_sgd, rf_train

__all__ = [
    "NAMED_ARCHITECTURES",
    "Adam",
    "KnnModel",
    "MlpModel",
    "RandomFeatureModel",
    "Sgd",
    "TaskKind",
    "TrainConfig",
    "default_learning_rate",
    "default_ridge",
    "knn_fit",
    "knn_predict",
    "load_model",
    "mlp_forward",
    "mlp_gradients",
    "mlp_train",
    "mlp_train_arrays",
    "models_equal",
    "parse_architecture",
    "rf_features",
    "rf_fit",
    "rf_fit_sgd",
    "rf_train",
    "save_model",
    "training_pairs",
]
