"""Wrapper (FE, BE, RFE, RFECV) and filter (ANOVA F, Kendall tau-b, Pearson) selection.

Wrappers work on source features: a one-hot feature enters or leaves as a
whole. Filters score individual encoded columns.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .features import EncodedMatrix, standardize
from .learners.metrics import confusion_matrix, compute_metrics
from .learners.models import ModelSpec, feature_importance
from .learners.validation import CVSpec, derive_seed, origins, stratified_kfold
from .resample import BalanceSpec, rebalance

logger = logging.getLogger(__name__)

METHODS = ("FE", "BE", "RFE", "RFECV", "ANOVA", "KENDALL")


class SelectionError(ValueError):
    pass


@dataclass
class SelectionResult:
    """Outcome of one selection method.

    ``selected`` is the chosen feature set (in selection order for FE, in
    manifest order otherwise). ``ranking`` orders every input feature from
    most to least useful. ``steps`` holds ``(step, feature, score)`` for
    wrappers (feature added by FE, removed by BE/RFE) and ``(rank, feature,
    score)`` for filters.
    """

    method: str
    selected: list
    ranking: list
    steps: list = field(default_factory=list)
    chosen_k: int | None = None
    curve: list | None = None  # RFECV: (k, mean, std, stderr)
    flags: dict = field(default_factory=dict)
    notes: str = ""
    leaked_rows: int = 0  # provenance overlaps between training and test parts

    @property
    def scores(self) -> list[float]:
        return [s for _, _, s in self.steps]

    def steps_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "feature", "score"])
        for step, feat, score in self.steps:
            w.writerow([step, feat, "" if score is None or np.isnan(score) else repr(float(score))])
        return buf.getvalue()

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "mean", "std"])
        for k, mean, std, _ in self.curve or []:
            w.writerow([k, repr(mean), repr(std)])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps({"method": self.method, "chosen_k": self.chosen_k,
                           "selected": list(self.selected), "ranking": list(self.ranking),
                           "flags": self.flags, "notes": self.notes}, indent=2)


def _cv_score(X: EncodedMatrix, names, model_spec: ModelSpec, cv: CVSpec, leaks: list) -> float:
    report = cv.run(X.select_features(names), model_spec)
    leaks.append(report.leaked_rows)
    return report.mean("accuracy")


def forward_elimination(X: EncodedMatrix, model_spec: ModelSpec | None = None, k: int | None = None,
                        cv: CVSpec | None = None) -> SelectionResult:
    """Greedy forward selection by cross-validated accuracy.

    Each step adds the feature giving the best score for the grown set (ties
    to the earliest feature). Without ``k`` the search stops as soon as no
    addition strictly improves the score; with ``k`` it runs until ``k``
    features are selected.
    """
    model_spec = model_spec or ModelSpec("dt")
    cv = cv or CVSpec()
    pool = X.features
    if not pool:
        raise SelectionError("no features to select from")
    if k is not None and not 1 <= k <= len(pool):
        raise SelectionError(f"k={k} outside 1..{len(pool)}")
    chosen, steps, current, leaks = [], [], -np.inf, []
    while len(chosen) < len(pool) and (k is None or len(chosen) < k):
        best_f, best_s = None, -np.inf
        for f in pool:
            if f in chosen:
                continue
            s = _cv_score(X, chosen + [f], model_spec, cv, leaks)
            if s > best_s:
                best_f, best_s = f, s
        if k is None and not best_s > current:
            break
        chosen.append(best_f)
        steps.append((len(steps) + 1, best_f, best_s))
        current = best_s
        logger.debug("FE step %d: +%s -> %.4f", len(steps), best_f, best_s)
    rest = [f for f in pool if f not in chosen]
    return SelectionResult("FE", chosen, chosen + rest, steps, len(chosen), leaked_rows=sum(leaks))


def backward_elimination(X: EncodedMatrix, model_spec: ModelSpec | None = None, k: int | None = None,
                         cv: CVSpec | None = None) -> SelectionResult:
    """Greedy backward elimination by cross-validated accuracy.

    Each step removes the feature whose removal leaves the best score (ties
    to the earliest feature). Without ``k`` removal continues while the score
    does not drop below the current one; with ``k`` it runs until ``k``
    features remain. A single feature is never removed.
    """
    model_spec = model_spec or ModelSpec("dt")
    cv = cv or CVSpec()
    kept = X.features
    if not kept:
        raise SelectionError("no features to select from")
    if k is not None and not 1 <= k <= len(kept):
        raise SelectionError(f"k={k} outside 1..{len(kept)}")
    leaks = []
    current = _cv_score(X, kept, model_spec, cv, leaks) if k is None and len(kept) > 1 else np.nan
    removed, steps = [], []
    while len(kept) > 1 and (k is None or len(kept) > k):
        best_f, best_s = None, -np.inf
        for f in kept:
            s = _cv_score(X, [g for g in kept if g != f], model_spec, cv, leaks)
            if s > best_s:
                best_f, best_s = f, s
        if k is None and best_s < current:
            break
        kept = [g for g in kept if g != best_f]
        removed.append(best_f)
        steps.append((len(steps) + 1, best_f, best_s))
        current = best_s
        logger.debug("BE step %d: -%s -> %.4f", len(steps), best_f, best_s)
    return SelectionResult("BE", kept, kept + removed[::-1], steps, len(kept), leaked_rows=sum(leaks))


def _importances(model, X: EncodedMatrix) -> np.ndarray:
    imp = feature_importance(model, level="feature")
    return np.array([imp[f] for f in X.features])


def _fit(X: EncodedMatrix, model_spec: ModelSpec, seed: int):
    Xs, _ = standardize(X)
    return model_spec.fit(Xs, seed=seed), Xs.stats


def _elimination_path(train: EncodedMatrix, model_spec: ModelSpec, stop: int, seed: int,
                      on_size=None) -> tuple[list, list]:
    """Drop the least important feature until ``stop`` remain.

    Returns (remaining, dropped in order). ``on_size(names, model, stats)``
    sees every intermediate fit, largest set first.
    """
    names = train.features
    dropped = []
    while True:
        sub = train.select_features(names)
        if on_size is not None or len(names) > stop:
            model, stats = _fit(sub, model_spec, seed)
            if on_size is not None:
                on_size(list(names), model, stats)
        if len(names) <= stop:
            break
        imp = _importances(model, sub)
        lowest = np.flatnonzero(imp <= imp.min())
        victim = names[lowest[-1]]  # ties: drop the latest feature
        dropped.append((victim, float(imp[lowest[-1]])))
        names = [n for n in names if n != victim]
    return names, dropped


def rfe(X: EncodedMatrix, model_spec: ModelSpec | None = None, k: int = 1,
        seed: int = 0) -> SelectionResult:
    """Recursive elimination by model importance down to ``k`` features."""
    model_spec = model_spec or ModelSpec("dt")
    n = len(X.features)
    if n == 0:
        raise SelectionError("no features to select from")
    if not 1 <= k <= n:
        raise SelectionError(f"k={k} outside 1..{n}")
    kept, dropped = _elimination_path(X, model_spec, k, derive_seed(seed, "rfe"))
    steps = [(i + 1, f, s) for i, (f, s) in enumerate(dropped)]
    return SelectionResult("RFE", kept, kept + [f for f, _ in dropped[::-1]], steps, k)


def rfe_cv(X: EncodedMatrix, model_spec: ModelSpec | None = None,
           cv: CVSpec | None = None) -> SelectionResult:
    """RFE with the number of features chosen by cross-validation.

    Inside every fold the elimination path is computed on the (balanced)
    training part only and each intermediate set is scored on the held-out
    part. ``k*`` is the smallest size whose mean accuracy lies within one
    standard error of the best mean; the final set is RFE on all rows down
    to ``k*``.
    """
    model_spec = model_spec or ModelSpec("dt")
    cv = cv or CVSpec()
    n = len(X.features)
    if n == 0:
        raise SelectionError("no features to select from")
    balance = cv.balance or BalanceSpec()
    data = X
    if balance.technique != "none" and balance.scope == "whole-dataset":
        data = rebalance(X, balance.with_seed(derive_seed(cv.seed, "balance")))
    folds = stratified_kfold(data.y, cv.k, derive_seed(cv.seed, "folds"))
    scores = np.zeros((cv.k, n))
    leaked = 0
    rows = np.arange(data.n_rows)
    for i, test_idx in enumerate(folds):
        train = data.take(np.setdiff1d(rows, test_idx))
        test = data.take(test_idx)
        if balance.scope == "train-folds":
            train = rebalance(train, balance.with_seed(derive_seed(cv.seed, "balance", i)))
        leaked += len(np.intersect1d(origins(train), origins(test)))

        def score(names, model, stats, i=i, test=test):
            sub, _ = standardize(test.select_features(names), stats)
            cm = confusion_matrix(test.y, model.predict(sub))
            scores[i, len(names) - 1] = compute_metrics(cm, cv.average).accuracy

        _elimination_path(train, model_spec, 1, derive_seed(cv.seed, "model", i), on_size=score)
    mean = scores.mean(axis=0)
    std = scores.std(axis=0, ddof=1) if cv.k > 1 else np.zeros(n)
    se = std / np.sqrt(cv.k)
    best = int(np.argmax(mean))
    k_star = int(np.flatnonzero(mean >= mean[best] - se[best])[0]) + 1
    curve = [(k + 1, float(mean[k]), float(std[k]), float(se[k])) for k in range(n)]
    final = rfe(X, model_spec, k_star, seed=cv.seed)
    return SelectionResult("RFECV", final.selected, final.ranking, final.steps, k_star, curve,
                           notes="k* = smallest k within one standard error of the best mean accuracy",
                           leaked_rows=leaked)


def _columns(X, names=None):
    if isinstance(X, EncodedMatrix):
        return X.X, list(X.columns)
    A = np.asarray(X, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    return A, list(names) if names is not None else [f"x{i}" for i in range(A.shape[1])]


def _filter_result(method: str, names: list, scores: np.ndarray, flags: dict,
                   key=None) -> SelectionResult:
    key = np.abs(scores) if key is None else key
    order = sorted(range(len(names)), key=lambda i: (np.isnan(key[i]), -np.nan_to_num(key[i]), i))
    ranking = [names[i] for i in order]
    steps = [(r + 1, names[i], float(scores[i])) for r, i in enumerate(order)]
    return SelectionResult(method, ranking, ranking, steps, None, flags=flags)


def anova_f_scores(X, y) -> tuple[np.ndarray, dict]:
    """One-way F statistic of every column split by the binary label.

    Returns (scores, flags); a column is NaN and flagged when a class has
    fewer than two rows or the column is constant overall.
    """
    A, _ = _columns(X)
    y = np.asarray(y)
    levels = np.unique(y)
    n, p = A.shape
    flags = {}
    out = np.full(p, np.nan)
    sizes = np.array([(y == g).sum() for g in levels])
    if len(levels) < 2 or sizes.min() < 2:
        return out, {j: "a class has fewer than 2 rows" for j in range(p)}
    grand = A.mean(axis=0)
    ssb = np.zeros(p)
    ssw = np.zeros(p)
    for g in levels:
        part = A[y == g]
        m = part.mean(axis=0)
        ssb += len(part) * (m - grand) ** 2
        ssw += ((part - m) ** 2).sum(axis=0)
    df_b, df_w = len(levels) - 1, n - len(levels)
    for j in range(p):
        if ssw[j] > 0:
            out[j] = (ssb[j] / df_b) / (ssw[j] / df_w)
        elif ssb[j] > 0:
            out[j] = np.inf
            flags[j] = "zero within-class variance"
        else:
            flags[j] = "constant column"
    return out, flags


def anova_f(X, y=None, names=None) -> SelectionResult:
    scores, flags = anova_f_scores(X, X.y if y is None else y)
    _, cols = _columns(X, names)
    return _filter_result("ANOVA", cols, scores, {cols[j]: v for j, v in flags.items()}, key=scores)


def _tie_pairs(v: np.ndarray) -> int:
    _, counts = np.unique(v, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def _pair_sign_sum(x: np.ndarray, y: np.ndarray) -> int:
    """sum over i<j of sign(x_i - x_j) * sign(y_i - y_j)."""
    levels = np.unique(y)
    if len(levels) <= 64:
        total = 0
        sorted_by_level = [np.sort(x[y == lv]) for lv in levels]
        for b in range(1, len(levels)):
            for a in range(b):
                lo = sorted_by_level[a]
                hi = x[y == levels[b]]
                below = np.searchsorted(lo, hi, side="left").sum()
                above = (len(lo) - np.searchsorted(lo, hi, side="right")).sum()
                total += int(below) - int(above)
        return total
    total = 0
    step = max(1, 2_000_000 // len(x))
    for start in range(0, len(x), step):
        sx = np.sign(x[start:start + step, None] - x[None, :])
        sy = np.sign(y[start:start + step, None] - y[None, :])
        total += int((sx * sy).sum())
    return total // 2


def kendall_tau_b(x, y) -> float:
    """Kendall's tau-b with tie corrections; NaN when either side is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    n0 = n * (n - 1) // 2
    d = (n0 - _tie_pairs(x)) * (n0 - _tie_pairs(y))
    if d <= 0:
        return np.nan
    return _pair_sign_sum(x, y) / np.sqrt(float(d))


def kendall_tau(X, y=None, names=None) -> SelectionResult:
    A, cols = _columns(X, names)
    y = X.y if y is None else y
    scores = np.array([kendall_tau_b(A[:, j], y) for j in range(A.shape[1])])
    flags = {cols[j]: "zero variance" for j in range(len(cols)) if np.isnan(scores[j])}
    return _filter_result("KENDALL", cols, scores, flags)


def pearson_matrix(X, names=None) -> tuple[np.ndarray, list, dict]:
    """Pairwise Pearson correlations of the columns.

    Returns (matrix, column names, flags). The diagonal is 1; cells involving
    a constant column are NaN and that column is flagged.
    """
    A, cols = _columns(X, names)
    centred = A - A.mean(axis=0)
    norm = np.sqrt((centred ** 2).sum(axis=0))
    const = norm <= 1e-12 * np.maximum(1.0, np.abs(A).max(axis=0) if len(A) else 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        R = (centred.T @ centred) / np.outer(norm, norm)
    R = np.clip(R, -1.0, 1.0)
    R[const, :] = np.nan
    R[:, const] = np.nan
    np.fill_diagonal(R, 1.0)
    flags = {cols[j]: "zero variance" for j in np.flatnonzero(const)}
    return R, cols, flags
