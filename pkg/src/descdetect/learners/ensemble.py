"""Weighted soft-voting ensemble of a random forest and an SVM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from .svm import SvmModel
from .tree import ForestModel

FOREST_WEIGHT = 4.0
SVM_WEIGHT = 1.0


def soft_vote(p_forest, p_svm, w_forest=FOREST_WEIGHT, w_svm=SVM_WEIGHT):
    return (w_forest * np.asarray(p_forest) + w_svm * np.asarray(p_svm)) / (w_forest + w_svm)


@dataclass(frozen=True)
class EnsembleModel:
    forest: ForestModel
    svm: SvmModel
    w_forest: float = FOREST_WEIGHT
    w_svm: float = SVM_WEIGHT

    def __post_init__(self):
        if self.forest.n_features != self.svm.n_features:
            raise DimensionMismatch("forest and SVM were trained on different feature dimensions")

    @property
    def n_features(self) -> int:
        return self.forest.n_features

    def predict_proba(self, X) -> np.ndarray:
        return soft_vote(self.forest.predict_proba(X), self.svm.predict_proba(X), self.w_forest, self.w_svm)

    def to_dict(self) -> dict:
        return {
            "kind": "ensemble",
            "weights": {"forest": self.w_forest, "svm": self.w_svm},
            "forest": self.forest.to_dict(),
            "svm": self.svm.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc) -> "EnsembleModel":
        return cls(ForestModel.from_dict(doc["forest"]), SvmModel.from_dict(doc["svm"]),
                   float(doc["weights"]["forest"]), float(doc["weights"]["svm"]))


def predict_ensemble(model: EnsembleModel, x) -> float:
    return float(model.predict_proba(x)[0])


def model_from_dict(doc):
    kind = doc["kind"]
    if kind == "ensemble":
        return EnsembleModel.from_dict(doc)
    if kind == "forest":
        return ForestModel.from_dict(doc)
    if kind == "svm":
        return SvmModel.from_dict(doc)
    raise ValueError(f"unknown model kind {kind!r}")
