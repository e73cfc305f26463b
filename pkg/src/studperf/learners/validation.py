"""Stratified folds, cross-validation and exhaustive grid search."""

from __future__ import annotations

import hashlib
import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from joblib import Parallel, delayed

from ..features import EncodedMatrix, standardize
from ..resample import BalanceSpec, rebalance
from .metrics import MetricsReport, compute_metrics, confusion_matrix
from .models import ModelSpec

logger = logging.getLogger(__name__)


class FoldError(ValueError):
    pass


def derive_seed(root: int, *keys) -> int:
    """Child seed from a root seed and a path of keys.

    ``sha256("root/key1/key2...")`` truncated to 32 bits: independent of call
    order, so parallel and serial runs draw identical streams.
    """
    text = "/".join([str(int(root))] + [str(k) for k in keys])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "little")


def stratified_kfold(y, k: int, seed: int = 0) -> list[np.ndarray]:
    """Test-index arrays for ``k`` stratified folds.

    Each class is shuffled and dealt round-robin; the dealing position carries
    over between classes so fold sizes also differ by at most one.
    """
    if k < 2:
        raise FoldError("k must be at least 2")
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < k:
            raise FoldError(f"class {c} has {len(idx)} rows, fewer than k={k}")
        for j, i in enumerate(rng.permutation(idx)):
            folds[(offset + j) % k].append(i)
        offset += len(idx)
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def stratified_split(y, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) indices with each class split in the same proportion."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        n_test = int(round(len(idx) * test_fraction))
        n_test = min(max(n_test, 1), len(idx) - 1) if len(idx) > 1 else 0
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(test, dtype=np.int64))


def origins(m: EncodedMatrix) -> np.ndarray:
    tags = m.provenance.ravel()
    return np.unique(tags[tags >= 0])


def fit_and_score(train: EncodedMatrix, test: EncodedMatrix, model_spec: ModelSpec, seed: int,
                  average: str = "macro"):
    train_s, stats = standardize(train)
    test_s, _ = standardize(test, stats)
    model = model_spec.fit(train_s, seed=seed)
    cm = confusion_matrix(test.y, model.predict(test_s))
    return model, cm, compute_metrics(cm, average)


def cross_validate(X: EncodedMatrix, model_spec: ModelSpec, balance: BalanceSpec | None = None,
                   k: int = 10, seed: int = 0, average: str = "macro",
                   on_fold: Callable | None = None) -> MetricsReport:
    """k-fold stratified CV with optional class balancing.

    With scope ``train-folds`` only the training part of each fold is
    rebalanced; ``whole-dataset`` rebalances once before splitting. The
    standardization is always fitted on the training part. ``leaked_rows``
    counts test rows whose provenance also appears in the training set.
    ``on_fold(i, train, test)`` is called with the matrices each fold used.
    """
    balance = balance or BalanceSpec()
    data = X
    if balance.technique != "none" and balance.scope == "whole-dataset":
        data = rebalance(X, balance.with_seed(derive_seed(seed, "balance")))
    folds = stratified_kfold(data.y, k, derive_seed(seed, "folds"))
    results, confusions, leaked = [], [], 0
    all_rows = np.arange(data.n_rows)
    for i, test_idx in enumerate(folds):
        train = data.take(np.setdiff1d(all_rows, test_idx))
        test = data.take(test_idx)
        if balance.scope == "train-folds":
            train = rebalance(train, balance.with_seed(derive_seed(seed, "balance", i)))
        leaked += len(np.intersect1d(origins(train), origins(test)))
        if on_fold is not None:
            on_fold(i, train, test)
        _, cm, metrics = fit_and_score(train, test, model_spec, derive_seed(seed, "model", i), average)
        results.append(metrics)
        confusions.append(cm)
    meta = {"model": model_spec.label(), "balance": balance.technique, "scope": balance.scope,
            "k": k, "seed": seed, "average": average}
    return MetricsReport(results, confusions, average, leaked, meta)


@dataclass(frozen=True)
class CVSpec:
    """How a configuration is scored: folds, root seed, balancing, averaging."""

    k: int = 10
    seed: int = 0
    balance: BalanceSpec | None = None
    average: str = "macro"

    def run(self, X: EncodedMatrix, model_spec: ModelSpec, on_fold: Callable | None = None) -> MetricsReport:
        return cross_validate(X, model_spec, self.balance, self.k, self.seed, self.average, on_fold)


def expand_grid(grid: Mapping) -> list[dict]:
    """Grid points in lexicographic order: parameter names sorted, values as listed."""
    names = sorted(grid)
    return [dict(zip(names, values)) for values in itertools.product(*(grid[n] for n in names))]


@dataclass
class GridResult:
    best_params: dict
    best_report: MetricsReport
    table: list  # (params, MetricsReport) in grid order

    def scores(self) -> list[tuple[dict, float]]:
        return [(p, r.mean("accuracy")) for p, r in self.table]


def grid_search(X: EncodedMatrix, family: str, grid: Mapping, k: int = 10, seed: int = 0,
                balance: BalanceSpec | None = None, average: str = "macro",
                n_jobs: int = 1) -> GridResult:
    """Cross-validate every grid point (same folds for all) and keep the best.

    Best = highest mean accuracy; ties go to the first point in grid order.
    """
    points = expand_grid(grid)
    if not points:
        raise ValueError("empty grid")
    specs = [ModelSpec(family, p) for p in points]
    if n_jobs == 1 or len(specs) == 1:
        reports = [cross_validate(X, s, balance, k, seed, average) for s in specs]
    else:
        reports = Parallel(n_jobs=n_jobs)(
            delayed(cross_validate)(X, s, balance, k, seed, average) for s in specs)
    best = 0
    for i, r in enumerate(reports):
        if r.mean("accuracy") > reports[best].mean("accuracy"):
            best = i
    table = list(zip(points, reports))
    return GridResult(points[best], reports[best], table)
