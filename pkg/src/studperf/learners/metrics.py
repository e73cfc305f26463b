"""Confusion-matrix metrics and per-fold reports."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

METRICS = ("accuracy", "precision", "recall", "f_score")
AVERAGES = ("macro", "weighted")


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """2x2 counts, rows = truth, columns = prediction: [[TN, FP], [FN, TP]]."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _as_confusion(confusion) -> np.ndarray:
    if isinstance(confusion, Mapping):
        c = {k.lower(): v for k, v in confusion.items()}
        cm = np.array([[c["tn"], c["fp"]], [c["fn"], c["tp"]]])
    else:
        cm = np.asarray(confusion)
    if cm.shape != (2, 2):
        raise ValueError("confusion must be 2x2 [[TN, FP], [FN, TP]]")
    if np.any(cm < 0) or cm.sum() <= 0:
        raise ValueError("confusion counts must be non-negative with a positive total")
    return cm


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f_score: float
    flags: tuple = ()

    def as_dict(self) -> dict:
        return {m: getattr(self, m) for m in METRICS}


def compute_metrics(confusion, average: str = "macro") -> Metrics:
    """Accuracy and class-averaged precision/recall/F1, all in percent.

    A class with no predicted (or no true) rows contributes 0 to precision
    (or recall) and is reported in ``flags``.
    """
    if average not in AVERAGES:
        raise ValueError(f"average must be one of {AVERAGES}")
    cm = _as_confusion(confusion).astype(float)
    total = cm.sum()
    flags = []
    prec, rec, f1 = np.zeros(2), np.zeros(2), np.zeros(2)
    for c in (0, 1):
        tp = cm[c, c]
        predicted = cm[:, c].sum()
        actual = cm[c, :].sum()
        if predicted > 0:
            prec[c] = tp / predicted
        else:
            flags.append(f"precision undefined for class {c}")
        if actual > 0:
            rec[c] = tp / actual
        else:
            flags.append(f"recall undefined for class {c}")
        if prec[c] + rec[c] > 0:
            f1[c] = 2 * prec[c] * rec[c] / (prec[c] + rec[c])
    if average == "macro":
        w = np.array([0.5, 0.5])
    else:
        w = cm.sum(axis=1) / total
    return Metrics(
        accuracy=100.0 * (cm[0, 0] + cm[1, 1]) / total,
        precision=100.0 * float(w @ prec),
        recall=100.0 * float(w @ rec),
        f_score=100.0 * float(w @ f1),
        flags=tuple(flags),
    )


@dataclass
class MetricsReport:
    """Per-fold metrics of one cross-validated configuration."""

    folds: list
    confusions: list
    average: str = "macro"
    leaked_rows: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.folds)

    def values(self, metric: str) -> np.ndarray:
        return np.array([getattr(f, metric) for f in self.folds])

    def mean(self, metric: str = "accuracy") -> float:
        return float(self.values(metric).mean())

    def std(self, metric: str = "accuracy") -> float:
        """Sample standard deviation across folds."""
        v = self.values(metric)
        return float(v.std(ddof=1)) if len(v) > 1 else 0.0

    def stderr(self, metric: str = "accuracy") -> float:
        return self.std(metric) / np.sqrt(self.k) if self.k else 0.0

    @property
    def confusion(self) -> np.ndarray:
        return np.sum(self.confusions, axis=0)

    def summary(self) -> dict:
        out = {}
        for m in METRICS:
            out[m] = self.mean(m)
            out[f"{m}_std"] = self.std(m)
            out[f"{m}_stderr"] = self.stderr(m)
        return out

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["fold", *METRICS, "tn", "fp", "fn", "tp",
                  *[f"{m}_std" for m in METRICS], *[f"{m}_stderr" for m in METRICS]]
        w.writerow(header)
        for i, (f, cm) in enumerate(zip(self.folds, self.confusions)):
            w.writerow([i, *[f"{getattr(f, m):.2f}" for m in METRICS],
                        *np.asarray(cm).ravel().tolist(), *[""] * 8])
        total = self.confusion.ravel().tolist() if self.k else [0, 0, 0, 0]
        w.writerow(["aggregate", *[f"{self.mean(m):.2f}" for m in METRICS], *total,
                    *[f"{self.std(m):.2f}" for m in METRICS],
                    *[f"{self.stderr(m):.2f}" for m in METRICS]])
        return buf.getvalue()

    def to_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text())
