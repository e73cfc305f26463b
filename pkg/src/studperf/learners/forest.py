"""Bagged CART ensemble."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tree import DecisionTree, _as_arrays, train_tree


@dataclass
class Forest:
    trees: list
    seeds: list
    max_features: int | None
    bootstrap: bool = True
    columns: tuple | None = None
    manifest: dict | None = None
    categories: dict | None = None

    family = "rf"

    @property
    def importances(self) -> np.ndarray:
        return np.mean([t.importances for t in self.trees], axis=0)

    def predict(self, X) -> np.ndarray:
        votes = np.sum([t.predict(X) for t in self.trees], axis=0)
        # strict majority for class 1; split votes go to class 0
        return (2 * votes > len(self.trees)).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "family": "rf",
            "trees": [t.to_dict() for t in self.trees],
            "seeds": [int(s) for s in self.seeds],
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "columns": None if self.columns is None else list(self.columns),
            "manifest": None if self.manifest is None else {k: list(v) for k, v in self.manifest.items()},
            "categories": None if self.categories is None else {k: str(v) for k, v in self.categories.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        return cls([DecisionTree.from_dict(t) for t in d["trees"]], d["seeds"], d["max_features"],
                   d["bootstrap"], None if d["columns"] is None else tuple(d["columns"]),
                   None if d["manifest"] is None else {k: tuple(v) for k, v in d["manifest"].items()},
                   d["categories"])


def train_forest(X, y=None, n_trees: int = 100, max_depth: int | None = None,
                 min_samples_split: int = 2, min_samples_leaf: int = 1, seed: int = 0,
                 max_features="sqrt", bootstrap: bool = True) -> Forest:
    """Train ``n_trees`` trees, each on its own bootstrap of the rows.

    ``max_features="sqrt"`` examines ceil(sqrt(p)) features per split;
    ``None`` examines all of them. ``bootstrap=False`` trains every tree on
    the full data (test hook).
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X, y, columns, manifest, categories = _as_arrays(X, y)
    n, p = X.shape
    if max_features == "sqrt":
        max_features = math.ceil(math.sqrt(p))
    seeds = np.random.SeedSequence(seed).generate_state(n_trees, dtype=np.uint32).tolist()
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree = train_tree(X[rows], y[rows], max_depth=max_depth,
                          min_samples_split=min_samples_split, min_samples_leaf=min_samples_leaf,
                          max_features=max_features, rng=rng)
        tree.columns, tree.manifest, tree.categories = columns, manifest, categories
        trees.append(tree)
    return Forest(trees, seeds, max_features, bootstrap, columns, manifest, categories)
