"""Class balancing for binary-labelled encoded matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .features import EncodedMatrix

TECHNIQUES = ("none", "upsample", "downsample", "up_and_down", "smote")
SCOPES = ("train-folds", "whole-dataset")


class BalanceError(ValueError):
    pass


@dataclass(frozen=True)
class BalanceSpec:
    technique: str = "none"
    seed: int = 0
    smote_k: int = 5
    scope: str = "train-folds"

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise BalanceError(f"unknown balancing technique {self.technique!r}; choose from {TECHNIQUES}")
        if self.scope not in SCOPES:
            raise BalanceError(f"unknown balancing scope {self.scope!r}; choose from {SCOPES}")
        if self.smote_k < 1:
            raise BalanceError("smote_k must be >= 1")

    def with_seed(self, seed: int) -> "BalanceSpec":
        return replace(self, seed=int(seed))


def _split(y: np.ndarray):
    idx0, idx1 = np.flatnonzero(y == 0), np.flatnonzero(y == 1)
    if len(idx0) == 0 or len(idx1) == 0:
        raise BalanceError("both classes must be present to rebalance")
    if len(idx0) + len(idx1) != len(y):
        raise BalanceError("labels must be 0/1")
    # minority first; on equal counts class 1 is treated as minority (no-op anyway)
    return (idx1, idx0) if len(idx1) <= len(idx0) else (idx0, idx1)


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _assemble(X: EncodedMatrix, rows, synth_X=None, synth_prov=None, synth_y=None) -> EncodedMatrix:
    rows = np.asarray(rows, dtype=np.int64)
    out = X.take(rows)
    if synth_X is None or len(synth_X) == 0:
        return out
    ids = out.learner_ids + tuple(f"smote:{X.learner_ids[b]}" for b in synth_prov[:, 2])
    return replace(out,
                   X=np.vstack([out.X, synth_X]),
                   y=np.concatenate([out.y, synth_y]),
                   learner_ids=ids,
                   provenance=np.vstack([out.provenance, synth_prov[:, :2]]))


def smote_points(Z: np.ndarray, X: np.ndarray, n_new: int, k: int, rng: np.random.Generator):
    """Interpolate ``n_new`` points between minority rows and their neighbours.

    Neighbours are searched in ``Z`` (standardized copy); points are built in
    ``X``. Returns (points, base_index, neighbour_index).
    """
    n = len(Z)
    neighbours = np.empty((n, k), dtype=np.int64)
    step = max(1, 4_000_000 // max(1, n * Z.shape[1]))
    for start in range(0, n, step):
        stop = min(n, start + step)
        d = ((Z[start:stop, None, :] - Z[None, :, :]) ** 2).sum(axis=-1)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort: equal distances resolve to the lower row index
        neighbours[start:stop] = np.argsort(d, axis=1, kind="stable")[:, :k]
    base = rng.integers(0, len(X), size=n_new)
    pick = rng.integers(0, k, size=n_new)
    u = rng.random(n_new)
    nn = neighbours[base, pick]
    pts = X[base] + u[:, None] * (X[nn] - X[base])
    return pts, base, nn


def rebalance(X: EncodedMatrix, spec: BalanceSpec) -> EncodedMatrix:
    """Return a balanced copy of ``X`` (``none`` returns ``X`` itself).

    Original rows keep their order; added rows are appended. Every output row
    carries provenance back to the input rows it came from.
    """
    if spec.technique == "none":
        return X
    if X.y is None:
        raise BalanceError("matrix has no labels")
    minority, majority = _split(X.y)
    n_min, n_maj = len(minority), len(majority)
    rng = np.random.default_rng(spec.seed)

    if spec.technique == "upsample":
        extra = rng.choice(minority, size=n_maj - n_min, replace=True)
        return _assemble(X, np.concatenate([np.arange(X.n_rows), extra]))

    if spec.technique == "downsample":
        kept = np.sort(rng.choice(majority, size=n_min, replace=False))
        rows = np.sort(np.concatenate([minority, kept]))
        return _assemble(X, rows)

    if spec.technique == "up_and_down":
        target = _half_up((n_min + n_maj) / 2)
        kept = np.sort(rng.choice(majority, size=target, replace=False))
        extra = rng.choice(minority, size=target - n_min, replace=True)
        rows = np.concatenate([np.sort(np.concatenate([minority, kept])), extra])
        return _assemble(X, rows)

    # smote
    if spec.smote_k >= n_min:
        raise BalanceError(f"smote_k={spec.smote_k} needs more than {n_min} minority rows")
    Xm = X.X[minority]
    mu, sd = Xm.mean(axis=0), Xm.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    pts, base, nn = smote_points((Xm - mu) / sd, Xm, n_maj - n_min, spec.smote_k, rng)
    prov = np.column_stack([X.provenance[minority[base], 0], X.provenance[minority[nn], 0],
                            minority[base]])
    label = X.y[minority[0]]
    return _assemble(X, np.arange(X.n_rows), pts, prov, np.full(len(pts), label))


def class_counts(y) -> tuple[int, int]:
    y = np.asarray(y)
    return int((y == 0).sum()), int((y == 1).sum())
