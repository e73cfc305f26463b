"""CART classification tree with Gini impurity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# scores closer than this are treated as ties (resolved by feature index, then threshold)
TIE_EPS = 1e-12


class ColumnMismatchError(ValueError):
    pass


def gini(class_counts) -> float:
    """Gini impurity ``1 - sum(p_c ** 2)`` of a vector of class counts."""
    c = np.asarray(class_counts, dtype=float)
    if np.any(c < 0):
        raise ValueError("class counts must be non-negative")
    total = c.sum()
    if total <= 0:
        raise ValueError("gini is undefined for an empty node")
    p = c / total
    return float(1.0 - np.sum(p * p))


def _as_arrays(X, y=None):
    columns = manifest = categories = None
    if hasattr(X, "manifest"):
        columns, manifest, categories = tuple(X.columns), dict(X.manifest), dict(X.categories)
        if y is None:
            y = X.y
        X = X.X
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be two-dimensional")
    if y is not None:
        y = np.asarray(y, dtype=np.int64)
    return X, y, columns, manifest, categories


@dataclass
class DecisionTree:
    """Fitted tree stored as parallel node arrays in pre-order.

    ``feature[i] == -1`` marks a leaf. Rows with ``x[feature] <= threshold``
    go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    importances: np.ndarray
    n_features: int
    params: dict = field(default_factory=dict)
    columns: tuple | None = None
    manifest: dict | None = None
    categories: dict | None = None

    family = "dt"

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def check_columns(self, X):
        if hasattr(X, "columns") and self.columns is not None:
            if tuple(X.columns) != self.columns:
                raise ColumnMismatchError(f"expected columns {self.columns}, got {tuple(X.columns)}")
            return X.X
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ColumnMismatchError(f"expected {self.n_features} columns, got shape {X.shape}")
        return X

    def apply(self, X) -> np.ndarray:
        X = self.check_columns(X)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        # argmax takes the first maximum, so leaf ties go to class 0
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def to_dict(self) -> dict:
        return {
            "family": "dt",
            "feature": self.feature.tolist(),
            "threshold": [None if np.isnan(t) else float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "importances": self.importances.tolist(),
            "n_features": self.n_features,
            "params": dict(self.params),
            "columns": None if self.columns is None else list(self.columns),
            "manifest": None if self.manifest is None else {k: list(v) for k, v in self.manifest.items()},
            "categories": None if self.categories is None else {k: str(v) for k, v in self.categories.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.array([np.nan if t is None else t for t in d["threshold"]], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            counts=np.asarray(d["counts"], dtype=np.int64).reshape(len(d["feature"]), -1),
            importances=np.asarray(d["importances"], dtype=float),
            n_features=d["n_features"],
            params=d["params"],
            columns=None if d["columns"] is None else tuple(d["columns"]),
            manifest=None if d["manifest"] is None else {k: tuple(v) for k, v in d["manifest"].items()},
            categories=d["categories"],
        )


def _best_split(Xn: np.ndarray, onehot: np.ndarray, min_leaf: int):
    """Best admissible split over the columns of ``Xn`` for one node.

    Every midpoint between consecutive distinct values of every column is
    scored by weighted child Gini. Returns ``(column, score, threshold)`` or
    ``None`` if no column can split. Scores within ``TIE_EPS`` of the minimum
    count as ties; the lowest column, then the lowest threshold, wins.
    """
    m, p = Xn.shape
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    cum = np.cumsum(onehot[order], axis=0)  # (m, p, classes)
    n_left = np.arange(1, m)[:, None]
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
    if not valid.any():
        return None
    left = cum[:-1]
    right = cum[-1][None] - left
    n_right = m - n_left
    weighted = (n_left - (left * left).sum(axis=2) / n_left
                + n_right - (right * right).sum(axis=2) / n_right) / m
    weighted = np.where(valid, weighted, np.inf)
    best = weighted.min()
    hit = weighted <= best + TIE_EPS
    col = int(np.argmax(hit.any(axis=0)))
    pos = int(np.argmax(hit[:, col]))
    a, b = xs[pos, col], xs[pos + 1, col]
    thr = (a + b) / 2.0
    if thr >= b:  # adjacent floats
        thr = a
    return col, float(weighted[pos, col]), float(thr)


def train_tree(X, y=None, max_depth: int | None = None, min_samples_split: int = 2,
               min_samples_leaf: int = 1, max_features: int | None = None,
               rng: np.random.Generator | None = None, n_classes: int = 2) -> DecisionTree:
    """Grow a CART tree by greedy weighted-Gini minimisation.

    Parameters
    ----------
    X : array of shape (n, p) or EncodedMatrix
        Numeric inputs. Column names are remembered when an EncodedMatrix is
        given, and checked again at prediction time.
    y : array of int, optional
        Class labels in ``0..n_classes-1``; taken from ``X.y`` if omitted.
    max_depth : int or None
        ``None`` grows until purity or the sample rules stop it.
    min_samples_split, min_samples_leaf : int
        Nodes smaller than ``min_samples_split`` become leaves; splits leaving
        fewer than ``min_samples_leaf`` rows on a side are not considered.
    max_features : int or None
        Features examined per split (random subset drawn from ``rng``). More
        features are tried when none of the drawn ones can split the node.

    Notes
    -----
    Candidate thresholds are midpoints between consecutive distinct values.
    Ties between candidates go to the lowest feature index, then the lowest
    threshold. Impure nodes split even when no split lowers the impurity.
    """
    X, y, columns, manifest, categories = _as_arrays(X, y)
    if len(X) == 0:
        raise ValueError("cannot train a tree on zero rows")
    if y is None or len(y) != len(X):
        raise ValueError("labels missing or of wrong length")
    n, p = X.shape
    n_classes = max(n_classes, int(y.max()) + 1)
    onehot = np.eye(n_classes, dtype=np.int64)[y]
    if max_features is not None and max_features < p and rng is None:
        raise ValueError("feature subsampling needs an rng")

    feature, threshold, left, right, counts = [], [], [], [], []
    importances = np.zeros(p)
    # (rows, depth, parent id, is_left)
    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        c = onehot[rows].sum(axis=0)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        counts.append(c)
        m = len(rows)
        g = 1.0 - float(((c / m) ** 2).sum())
        if (g <= 0.0 or (max_depth is not None and depth >= max_depth)
                or m < min_samples_split or m < 2 * min_samples_leaf):
            continue

        if max_features is None or max_features >= p:
            order = [np.arange(p)]
        else:
            perm = rng.permutation(p)
            order = [np.sort(perm[:max_features])] + [[f] for f in perm[max_features:]]
        split = None
        for group in order:
            group = np.asarray(group)
            split = _best_split(X[np.ix_(rows, group)], onehot[rows], min_samples_leaf)
            if split is not None:
                f, score, thr = int(group[split[0]]), split[1], split[2]
                break
        if split is None:
            continue

        go_left = X[rows, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        importances[f] += (m * g - m * score) / n
        feature[node], threshold[node] = f, thr
        stack.append((rrows, depth + 1, node, False))
        stack.append((lrows, depth + 1, node, True))

    total = importances.sum()
    importances = importances / total if total > 0 else np.zeros(p)
    params = {"max_depth": max_depth, "min_samples_split": min_samples_split,
              "min_samples_leaf": min_samples_leaf, "max_features": max_features}
    return DecisionTree(np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=float),
                        np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
                        np.asarray(counts, dtype=np.int64).reshape(-1, n_classes), importances,
                        p, params, columns, manifest, categories)


def predict_tree(tree: DecisionTree, X) -> np.ndarray:
    return tree.predict(X)
