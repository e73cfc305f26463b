"""Linear soft-margin classifier trained by stochastic subgradient descent."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..features import StandardizationStats, standardize

logger = logging.getLogger(__name__)


class NotStandardizedError(ValueError):
    pass


@dataclass
class LinearMarginModel:
    weights: np.ndarray
    bias: float
    C: float
    stats: StandardizationStats | None
    objective_history: list = field(default_factory=list)
    columns: tuple | None = None
    manifest: dict | None = None
    categories: dict | None = None

    family = "svm"

    @property
    def importances(self) -> np.ndarray:
        a = np.abs(self.weights)
        return a / a.sum() if a.sum() > 0 else np.zeros_like(a)

    def decision_function(self, X) -> np.ndarray:
        if hasattr(X, "manifest"):
            if self.columns is not None and tuple(X.columns) != self.columns:
                from .tree import ColumnMismatchError
                raise ColumnMismatchError(f"expected columns {self.columns}, got {tuple(X.columns)}")
            if not X.standardized:
                X, _ = standardize(X, self.stats)
            X = X.X
        return np.asarray(X, dtype=float) @ self.weights + self.bias

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "family": "svm",
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "C": self.C,
            "stats": None if self.stats is None else self.stats.to_dict(),
            "objective_history": list(self.objective_history),
            "columns": None if self.columns is None else list(self.columns),
            "manifest": None if self.manifest is None else {k: list(v) for k, v in self.manifest.items()},
            "categories": None if self.categories is None else {k: str(v) for k, v in self.categories.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearMarginModel":
        stats = None if d["stats"] is None else StandardizationStats.from_dict(d["stats"])
        return cls(np.asarray(d["weights"], float), d["bias"], d["C"], stats, d["objective_history"],
                   None if d["columns"] is None else tuple(d["columns"]),
                   None if d["manifest"] is None else {k: tuple(v) for k, v in d["manifest"].items()},
                   d["categories"])


def svm_objective(w, b, X, s, C) -> float:
    """0.5 * ||w||^2 + C * sum(hinge(s_i * (w . x_i + b)))."""
    margins = s * (X @ w + b)
    return float(0.5 * w @ w + C * np.maximum(0.0, 1.0 - margins).sum())


def train_svm(X_standardized, y=None, C: float = 1.0, epochs: int = 30, seed: int = 0) -> LinearMarginModel:
    """Fit a linear margin model on standardized inputs.

    Pegasos-style updates with step ``1 / (lambda * t)`` where
    ``lambda = 1 / (C * n)``, which has the same minimiser as the C-weighted
    hinge objective. The bias rides along as a constant input column (so it
    is lightly regularised) and iterates are projected onto the ball of
    radius ``1 / sqrt(lambda)``. The returned weights are the average iterate
    of the last epoch; the objective of every epoch average is kept in
    ``objective_history``.
    """
    if not getattr(X_standardized, "standardized", False):
        raise NotStandardizedError("train_svm needs a matrix produced by standardize()")
    enc = X_standardized
    Z = enc.X
    y = enc.y if y is None else np.asarray(y, dtype=np.int64)
    n, p = Z.shape
    s = np.where(y == 1, 1.0, -1.0)
    meta = dict(columns=tuple(enc.columns), manifest=dict(enc.manifest), categories=dict(enc.categories))
    if C <= 0:
        model = LinearMarginModel(np.zeros(p), 0.0, float(C), enc.stats, [0.0], **meta)
        return model

    lam = 1.0 / (C * n)
    radius = 1.0 / np.sqrt(lam)
    Za = np.hstack([Z, np.ones((n, 1))])
    w = np.zeros(p + 1)
    rng = np.random.default_rng(seed)
    history = []
    t = 0
    avg = w
    for _ in range(epochs):
        acc = np.zeros(p + 1)
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            hinge_active = s[i] * (Za[i] @ w) < 1.0
            w = w * (1.0 - 1.0 / t)
            if hinge_active:
                w = w + (eta * s[i]) * Za[i]
            norm = np.sqrt(w @ w)
            if norm > radius:
                w = w * (radius / norm)
            acc += w
        avg = acc / n
        history.append(svm_objective(avg[:p], avg[p], Z, s, C))
    logger.debug("svm C=%g: final objective %.6g after %d epochs", C, history[-1], epochs)
    return LinearMarginModel(avg[:p].copy(), float(avg[p]), float(C), enc.stats, history, **meta)
