"""From-scratch binary classifiers emitting manipulation probabilities."""

from .ensemble import EnsembleModel, model_from_dict, predict_ensemble, soft_vote
from .svm import SvmModel, default_gamma, predict_svm, rbf_kernel, solve_smo, train_svm
from .tree import ForestModel, ForestParams, Tree, TreeParams, gini, predict_forest, predict_tree, train_forest, train_tree

__all__ = [
    "EnsembleModel", "ForestModel", "ForestParams", "SvmModel", "Tree", "TreeParams",
    "default_gamma", "gini", "model_from_dict", "predict_ensemble", "predict_forest",
    "predict_svm", "predict_tree", "rbf_kernel", "soft_vote", "solve_smo", "train_forest",
    "train_svm", "train_tree",
]
