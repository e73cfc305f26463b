"""Model families behind one small interface, plus importance aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .forest import Forest, train_forest
from .svm import LinearMarginModel, train_svm
from .tree import DecisionTree, train_tree

FAMILIES = ("dt", "rf", "svm", "majority")
MODEL_FORMAT_VERSION = 1

DEFAULT_GRIDS = {
    "dt": {"max_depth": [2, 3, 5, 10, None], "min_samples_leaf": [1, 2, 5]},
    "rf": {"n_trees": [50, 100, 200], "max_depth": [2, 3, 5, 10, None]},
    "svm": {"C": [0.01, 0.1, 1, 10]},
    "majority": {},
}


@dataclass
class MajorityModel:
    """Predicts the training majority class (class 0 on a tie)."""

    label: int
    n_features: int
    family = "majority"

    @property
    def importances(self) -> np.ndarray:
        return np.zeros(self.n_features)

    def predict(self, X) -> np.ndarray:
        n = X.n_rows if hasattr(X, "n_rows") else len(X)
        return np.full(n, self.label, dtype=np.int64)

    def to_dict(self):
        return {"family": "majority", "label": self.label, "n_features": self.n_features}


@dataclass(frozen=True)
class ModelSpec:
    family: str = "dt"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; choose from {FAMILIES}")

    def with_params(self, **params) -> "ModelSpec":
        return ModelSpec(self.family, {**self.params, **params})

    def fit(self, X, seed: int = 0):
        """Train on an EncodedMatrix (standardized for ``svm``)."""
        p = dict(self.params)
        if self.family == "dt":
            return train_tree(X, **p)
        if self.family == "rf":
            return train_forest(X, seed=seed, **p)
        if self.family == "svm":
            return train_svm(X, seed=seed, **p)
        y = X.y
        label = int(np.sum(y == 1) > np.sum(y == 0))
        return MajorityModel(label, X.X.shape[1])

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})"


def feature_importance(model, level: str = "column") -> dict:
    """Importances keyed by encoded column, source feature or category.

    One-hot columns are summed back into their source feature for
    ``level="feature"``; ``level="category"`` sums features per source
    category. Weights sum to 1 (or are all 0 when the model never split).
    """
    imp = np.asarray(model.importances, dtype=float)
    columns = getattr(model, "columns", None) or tuple(f"x{i}" for i in range(len(imp)))
    by_column = dict(zip(columns, imp.tolist()))
    if level == "column":
        return by_column
    manifest = getattr(model, "manifest", None)
    if manifest is None:
        raise ValueError("model was trained without a feature manifest")
    by_feature = {f: float(sum(by_column[c] for c in cols)) for f, cols in manifest.items()}
    if level == "feature":
        return by_feature
    if level == "category":
        out: dict = {}
        for f, v in by_feature.items():
            cat = str(model.categories[f])
            out[cat] = out.get(cat, 0.0) + v
        return out
    raise ValueError(f"unknown importance level {level!r}")


def save_model(model, path) -> None:
    doc = {"format_version": MODEL_FORMAT_VERSION, "model": model.to_dict()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
    d = doc["model"]
    family = d["family"]
    if family == "dt":
        return DecisionTree.from_dict(d)
    if family == "rf":
        return Forest.from_dict(d)
    if family == "svm":
        return LinearMarginModel.from_dict(d)
    return MajorityModel(d["label"], d["n_features"])
