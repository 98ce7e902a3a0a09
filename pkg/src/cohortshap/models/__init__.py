"""Model layer: from-scratch forest, kernel SVM, small MLP, and scaling."""

from .scaler import Scaler, fit_scaler, transform
from .forest import (
    ForestModel,
    ForestParams,
    TreeNode,
    fit_forest,
    fit_tree,
    flatten_tree,
    gini_impurity,
    predict_forest,
    predict_forest_batch,
    unflatten_tree,
)
from .svm import SvmModel, SvmParams, decision_function, fit_svm_smo, predict_svm
from .mlp import (
    MlpModel,
    MlpParams,
    fit_mlp,
    loss_and_gradients,
    predict_mlp,
    predict_mlp_batch,
)
from .serialize import load_model, save_model

__all__ = [
    "Scaler",
    "fit_scaler",
    "transform",
    "ForestModel",
    "ForestParams",
    "TreeNode",
    "fit_forest",
    "fit_tree",
    "flatten_tree",
    "gini_impurity",
    "predict_forest",
    "predict_forest_batch",
    "unflatten_tree",
    "SvmModel",
    "SvmParams",
    "decision_function",
    "fit_svm_smo",
    "predict_svm",
    "MlpModel",
    "MlpParams",
    "fit_mlp",
    "loss_and_gradients",
    "predict_mlp",
    "predict_mlp_batch",
    "load_model",
    "save_model",
]
