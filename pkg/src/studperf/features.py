"""Feature construction, labels, numeric encoding and standardization."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .ingest import ED_FIELDS, MOTIVATIONS, OULAD_PASS, DatasetBundle

logger = logging.getLogger(__name__)


class SourceCategory(str, Enum):
    D = "D"  # demographic
    A = "A"  # academic
    B = "B"  # behavioral
    P = "P"  # personality
    L = "L"  # learning preferences

    def __str__(self):
        return self.value


CATEGORY_ORDER = tuple(SourceCategory)


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    category: SourceCategory
    kind: str = "numeric"  # numeric | ordinal | categorical
    levels: tuple = ()
    declared_range: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("numeric", "ordinal", "categorical"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        object.__setattr__(self, "category", SourceCategory(self.category))


D, A, B, P, L = CATEGORY_ORDER
SPECS = {s.name: s for s in [
    FeatureSpec("age", D, "numeric", declared_range=(0, 120)),
    FeatureSpec("gender", D, "categorical", levels=("F", "M", "NA")),
    FeatureSpec("ed_level", D, "ordinal", declared_range=(1, 8)),
    FeatureSpec("ed_field", D, "categorical", levels=ED_FIELDS),
    FeatureSpec("avrg_grade", A, "numeric", declared_range=(0, 10)),
    FeatureSpec("%_completion", B, "numeric", declared_range=(0, 1)),
    FeatureSpec("nb_action", B, "numeric", declared_range=(0, np.inf)),
    FeatureSpec("time", B, "numeric", declared_range=(0, np.inf)),
    FeatureSpec("sum_click", B, "numeric", declared_range=(0, np.inf)),
    FeatureSpec("nevents", B, "numeric", declared_range=(0, np.inf)),
    FeatureSpec("motivation", P, "ordinal", levels=MOTIVATIONS),
    FeatureSpec("visual", L, declared_range=(0, 1)),
    FeatureSpec("verbal", L, declared_range=(0, 1)),
    FeatureSpec("factual", L, declared_range=(0, 1)),
    FeatureSpec("practical", L, declared_range=(0, 1)),
    FeatureSpec("memory", L, declared_range=(0, 1)),
    FeatureSpec("deduction", L, declared_range=(0, 1)),
    FeatureSpec("n_interactions", B, declared_range=(0, np.inf)),
]}

MINIMAL = {
    "D1": ["age", "gender", "ed_level", "ed_field", "avrg_grade", "%_completion",
           "nb_action", "time", "motivation"],
    "D2": ["age", "gender", "ed_level", "avrg_grade", "sum_click"],
    "D3": ["age", "gender", "ed_level", "nevents"],
}
ADDITIONAL = ["visual", "verbal", "factual", "practical", "memory", "deduction"]
INTERACTIONS = {"D1": "nb_action", "D2": "sum_click", "D3": "nevents"}
COMMON = ("age", "ed_level", "n_interactions")


class FeatureError(ValueError):
    pass


class EncodingError(FeatureError):
    pass


# ---------------------------------------------------------------------------
# feature matrix


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Learner rows by named, category-tagged features.

    ``quarantine`` maps a learner to ``{feature_or_"label": reason}``; such
    rows keep NaN in the affected cells until :func:`filter_complete` drops
    them.
    """

    specs: tuple
    values: pd.DataFrame
    labels: pd.Series | None = None
    quarantine: Mapping = field(default_factory=dict)
    dataset_id: str = ""
    removed: Mapping = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def learner_ids(self) -> list[str]:
        return list(self.values.index)

    def __len__(self):
        return len(self.values)

    def spec(self, name: str) -> FeatureSpec:
        for s in self.specs:
            if s.name == name:
                return s
        raise KeyError(name)

    def select(self, names: Iterable[str]) -> "FeatureMatrix":
        names = list(names)
        keep = set(names) | {"label"}
        specs = tuple(self.spec(n) for n in names)
        quarantine = {}
        for lid, reasons in self.quarantine.items():
            kept = {k: v for k, v in reasons.items() if k in keep}
            if kept:
                quarantine[lid] = kept
        return replace(self, specs=specs, values=self.values[names].copy(), quarantine=quarantine)

    def select_categories(self, categories: Iterable) -> "FeatureMatrix":
        cats = {SourceCategory(c) for c in categories}
        return self.select([s.name for s in self.specs if s.category in cats])

    def with_labels(self, labels: pd.Series) -> "FeatureMatrix":
        labels = labels.reindex(self.values.index).astype("Int64")
        quarantine = {k: dict(v) for k, v in self.quarantine.items()}
        for lid in labels.index[labels.isna()]:
            quarantine.setdefault(lid, {})["label"] = "no final outcome"
        return replace(self, labels=labels, quarantine=quarantine)

    def take(self, learner_ids: Sequence[str]) -> "FeatureMatrix":
        ids = list(learner_ids)
        labels = None if self.labels is None else self.labels.loc[ids]
        quarantine = {k: v for k, v in self.quarantine.items() if k in set(ids)}
        return replace(self, values=self.values.loc[ids], labels=labels, quarantine=quarantine)

    # serialization ---------------------------------------------------------

    def to_csv(self, path) -> None:
        lines = ["# studperf feature matrix v1", f"# dataset: {self.dataset_id}",
                 "# feature,category,kind,levels,lo,hi"]
        for s in self.specs:
            lo, hi = s.declared_range if s.declared_range else ("", "")
            lines.append(f"# {s.name},{s.category.value},{s.kind},{'|'.join(s.levels)},{lo},{hi}")
        body = self.values.copy()
        if self.labels is not None:
            body["label"] = self.labels
        body["quarantine"] = [
            ";".join(f"{k}={v}" for k, v in self.quarantine.get(lid, {}).items())
            for lid in body.index]
        text = body.to_csv(index_label="learner_id", na_rep="", lineterminator="\n")
        Path(path).write_text("\n".join(lines) + "\n" + text)

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        header, body = [], []
        for line in Path(path).read_text().splitlines(keepends=True):
            (header if line.startswith("#") else body).append(line)
        dataset_id = header[1].split(":", 1)[1].strip()
        specs = []
        for line in header[3:]:
            name, cat, kind, levels, lo, hi = line[1:].strip().split(",")
            rng = (float(lo), float(hi)) if lo != "" else None
            specs.append(FeatureSpec(name, SourceCategory(cat), kind,
                                     tuple(levels.split("|")) if levels else (), rng))
        from io import StringIO
        df = pd.read_csv(StringIO("".join(body)), dtype=str, keep_default_na=False)
        df = df.set_index("learner_id")
        values = pd.DataFrame(index=df.index)
        for s in specs:
            col = df[s.name].replace("", np.nan)
            values[s.name] = col if s.kind == "categorical" or (s.levels and s.kind == "ordinal") \
                else pd.to_numeric(col)
        labels = None
        if "label" in df.columns:
            labels = pd.to_numeric(df["label"].replace("", np.nan)).astype("Int64")
        quarantine = {}
        for lid, q in df["quarantine"].items():
            if q:
                quarantine[lid] = dict(part.split("=", 1) for part in q.split(";"))
        return cls(tuple(specs), values, labels, quarantine, dataset_id)


def _matrix(bundle: DatasetBundle, names: list[str], columns: Mapping[str, pd.Series],
            quarantine: dict) -> FeatureMatrix:
    index = pd.Index(bundle.profiles["learner_id"], dtype=object)
    values = pd.DataFrame({n: columns[n].reindex(index) for n in names}, index=index)
    return FeatureMatrix(tuple(SPECS[n] for n in names), values, None, quarantine, bundle.dataset_id)


def _mark(quarantine: dict, ids, feature: str, reason: str):
    for lid in ids:
        quarantine.setdefault(lid, {})[feature] = reason


def _avrg_grade(bundle: DatasetBundle, index: pd.Index) -> pd.Series:
    qa = bundle.quiz_attempts
    qa = qa[~qa["is_final"].astype(bool)]
    scaled = qa["grade"].astype(float) / qa["max_grade"].astype(float) * 10.0
    return scaled.groupby(qa["learner_id"]).mean().reindex(index)


def build_minimal_features(bundle: DatasetBundle) -> FeatureMatrix:
    """Demographic, academic, behavioral and motivation columns.

    Text answers are never included. D2 and D3 only get the columns their
    sources provide.
    """
    ds = bundle.dataset_id
    names = MINIMAL[ds]
    prof = bundle.profiles.set_index("learner_id")
    index = prof.index
    quarantine: dict = {}
    cols: dict[str, pd.Series] = {
        "age": pd.to_numeric(prof["age"], errors="coerce").astype(float),
        "gender": prof["gender"].astype(object),
        "ed_level": pd.to_numeric(prof["ed_level"], errors="coerce").astype(float),
    }
    if ds == "D1":
        cols["ed_field"] = prof["ed_field"].astype(object)
        cols["motivation"] = prof["motivation"].astype(object)
        ev = bundle.events
        n_items = ev["item_id"].nunique()
        touched = ev.groupby("learner_id")["item_id"].nunique().reindex(index).fillna(0)
        cols["%_completion"] = touched / n_items if n_items else pd.Series(np.nan, index=index)
        counted = ((ev["item_kind"] == "resource") & (ev["action"] == "view")) | \
                  ((ev["item_kind"] == "activity") & (ev["action"] == "attempt"))
        cols["nb_action"] = counted.groupby(ev["learner_id"]).sum().reindex(index).fillna(0).astype(float)
        qa = bundle.quiz_attempts
        dwell = qa["time_finished"].astype(float) - qa["time_started"].astype(float)
        cols["time"] = dwell.groupby(qa["learner_id"]).sum().reindex(index).fillna(0.0)
        cols["avrg_grade"] = _avrg_grade(bundle, index)
    else:
        source = INTERACTIONS[ds]
        if source not in bundle.aggregates.columns:
            raise FeatureError(f"{ds} bundle has no {source!r} column")
        agg = bundle.aggregates.set_index("learner_id")
        cols[source] = agg[source].astype(float).reindex(index)
        if ds == "D2":
            cols["avrg_grade"] = _avrg_grade(bundle, index)

    for name in names:
        missing = cols[name].isna()
        if not missing.any():
            continue
        if name == "avrg_grade":
            reason = "no non-final quiz attempt"
        elif name == "%_completion":
            reason = "no course items recorded"
        else:
            reason = f"missing {name}"
        _mark(quarantine, index[missing.to_numpy()], name, reason)
    return _matrix(bundle, names, cols, quarantine)


def build_additional_features(bundle: DatasetBundle) -> FeatureMatrix:
    """Learning-preference scores: mean question correctness per quiz tag."""
    if not len(bundle.quiz_items) or bundle.dataset_id != "D1":
        raise FeatureError("additional features need question results and tagged quiz items (D1 only)")
    items = bundle.quiz_items.set_index("quiz_id")
    qr = bundle.question_results
    qr = qr[qr["correct"].notna()]
    final = qr["quiz_id"].map(items["is_final"]).fillna(False).astype(bool)
    qr = qr[~final.to_numpy()]
    correct = qr["correct"].astype(float)
    fmt = qr["quiz_id"].map(items["format_tag"])
    cnt = qr["quiz_id"].map(items["content_tag"])
    index = pd.Index(bundle.profiles["learner_id"], dtype=object)
    selectors = {
        "visual": fmt == "visual",
        "verbal": fmt == "verbal",
        "factual": cnt == "factual",
        "practical": cnt == "practical",
        "memory": qr["skill_tag"] == "memory",
        "deduction": qr["skill_tag"] == "deduction",
    }
    cols, quarantine = {}, {}
    for name, mask in selectors.items():
        sub = correct[mask.to_numpy()]
        cols[name] = sub.groupby(qr["learner_id"][mask.to_numpy()]).mean().reindex(index)
        missing = cols[name].isna().to_numpy()
        _mark(quarantine, index[missing], name, f"no questions tagged {name}")
    return _matrix(bundle, ADDITIONAL, cols, quarantine)


def build_features(bundle: DatasetBundle, additional: bool | None = None,
                   pass_threshold: float = 0.5) -> FeatureMatrix:
    """Minimal (+ additional, when available) features with labels attached."""
    m = build_minimal_features(bundle)
    if additional is None:
        additional = bundle.dataset_id == "D1" and len(bundle.question_results) > 0
    if additional:
        m = join(m, build_additional_features(bundle))
    return m.with_labels(derive_labels(bundle, pass_threshold))


def join(left: FeatureMatrix, right: FeatureMatrix) -> FeatureMatrix:
    clash = set(left.names) & set(right.names)
    if clash:
        raise FeatureError(f"duplicate feature names {sorted(clash)}")
    if list(left.values.index) != list(right.values.index):
        raise FeatureError("feature matrices cover different learners")
    quarantine = {k: dict(v) for k, v in left.quarantine.items()}
    for k, v in right.quarantine.items():
        quarantine.setdefault(k, {}).update(v)
    values = pd.concat([left.values, right.values], axis=1)
    return FeatureMatrix(left.specs + right.specs, values, left.labels, quarantine, left.dataset_id)


def derive_labels(bundle: DatasetBundle, pass_threshold: float = 0.5) -> pd.Series:
    """Binary pass (1) / fail (0) per learner; ``<NA>`` where no outcome exists.

    D1 uses the last final-quiz attempt (``grade / max_grade >= threshold``),
    D2 maps ``final_result`` and D3 thresholds the configured grade column.
    """
    index = pd.Index(bundle.profiles["learner_id"], dtype=object)
    ds = bundle.dataset_id
    if ds == "D1":
        qa = bundle.quiz_attempts
        fin = qa[qa["is_final"].astype(bool)].sort_values(["learner_id", "time_finished"], kind="mergesort")
        last = fin.groupby("learner_id").tail(1).set_index("learner_id")
        ratio = last["grade"].astype(float) / last["max_grade"].astype(float)
        lab = (ratio >= pass_threshold).astype(int)
    elif ds == "D2":
        agg = bundle.aggregates.set_index("learner_id")
        lab = agg["final_result"].map(OULAD_PASS)
    else:
        agg = bundle.aggregates.set_index("learner_id")
        column = bundle.meta.get("label_column", "grade")
        vals = agg[column].astype(float)
        lab = (vals >= pass_threshold).astype(float).where(vals.notna())
    return lab.reindex(index).astype("Int64").rename("label")


def filter_complete(matrix: FeatureMatrix) -> FeatureMatrix:
    """Drop quarantined rows; what was dropped and why lands in ``removed``."""
    bad = [lid for lid in matrix.values.index if matrix.quarantine.get(lid)]
    if bad:
        logger.info("%s: removing %d incomplete row(s) of %d", matrix.dataset_id, len(bad), len(matrix))
    keep = [lid for lid in matrix.values.index if not matrix.quarantine.get(lid)]
    removed = dict(matrix.removed)
    removed.update({lid: dict(matrix.quarantine[lid]) for lid in bad})
    labels = None if matrix.labels is None else matrix.labels.loc[keep]
    return replace(matrix, values=matrix.values.loc[keep], labels=labels, quarantine={}, removed=removed)


# ---------------------------------------------------------------------------
# encoded matrix


@dataclass(frozen=True)
class StandardizationStats:
    columns: tuple
    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    def to_dict(self):
        return {"columns": list(self.columns), "mean": self.mean.tolist(),
                "scale": self.scale.tolist(), "constant": self.constant.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["columns"]), np.asarray(d["mean"], float),
                   np.asarray(d["scale"], float), np.asarray(d["constant"], bool))


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    """Dense numeric rows ready for the learners.

    ``manifest`` maps each source feature to its output columns (one-hot
    features expand to several). ``provenance`` holds, per row, the index of
    the original row it derives from and, for SMOTE rows, the neighbour it was
    interpolated towards (``-1`` otherwise).
    """

    columns: tuple
    X: np.ndarray
    y: np.ndarray | None
    learner_ids: tuple
    manifest: Mapping
    categories: Mapping
    provenance: np.ndarray | None = None
    stats: StandardizationStats | None = None
    dataset_id: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise ValueError(f"X has shape {X.shape} for {len(self.columns)} columns")
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.asarray(self.y, dtype=np.int64)
            if len(y) != len(X):
                raise ValueError("labels and rows differ in length")
            object.__setattr__(self, "y", y)
        if self.provenance is None:
            prov = np.column_stack([np.arange(len(X)), np.full(len(X), -1)]).astype(np.int64)
            object.__setattr__(self, "provenance", prov)

    @property
    def standardized(self) -> bool:
        return self.stats is not None

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def features(self) -> list[str]:
        return list(self.manifest)

    def groups(self) -> list[tuple[str, list[int]]]:
        """(feature, column indices) pairs in manifest order."""
        pos = {c: i for i, c in enumerate(self.columns)}
        return [(f, [pos[c] for c in cols]) for f, cols in self.manifest.items()]

    def column_category(self) -> list[SourceCategory]:
        owner = {c: f for f, cols in self.manifest.items() for c in cols}
        return [SourceCategory(self.categories[owner[c]]) for c in self.columns]

    def select_features(self, names: Iterable[str]) -> "EncodedMatrix":
        names = [n for n in self.manifest if n in set(names)]
        cols = [c for n in names for c in self.manifest[n]]
        idx = [self.columns.index(c) for c in cols]
        stats = None
        if self.stats is not None:
            stats = StandardizationStats(tuple(cols), self.stats.mean[idx],
                                         self.stats.scale[idx], self.stats.constant[idx])
        return replace(self, columns=tuple(cols), X=self.X[:, idx],
                       manifest={n: self.manifest[n] for n in names},
                       categories={n: self.categories[n] for n in names}, stats=stats)

    def select_categories(self, categories: Iterable) -> "EncodedMatrix":
        cats = {SourceCategory(c) for c in categories}
        return self.select_features([n for n in self.manifest if SourceCategory(self.categories[n]) in cats])

    def take(self, rows) -> "EncodedMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        return replace(self, X=self.X[rows], y=None if self.y is None else self.y[rows],
                       learner_ids=tuple(self.learner_ids[i] for i in rows),
                       provenance=self.provenance[rows])

    def manifest_json(self) -> str:
        return json.dumps({
            "dataset": self.dataset_id,
            "columns": list(self.columns),
            "manifest": {k: list(v) for k, v in self.manifest.items()},
            "categories": {k: SourceCategory(v).value for k, v in self.categories.items()},
            "standardization": None if self.stats is None else self.stats.to_dict(),
        }, indent=2)


@dataclass(frozen=True)
class EncodingPolicy:
    drop: tuple = ("gender",)
    ordinal_maps: Mapping = field(default_factory=lambda: {
        "motivation": {"little": 0, "moderate": 1, "very": 2},
    })


def encode(matrix: FeatureMatrix, policy: EncodingPolicy | None = None) -> EncodedMatrix:
    """Numeric passthrough, ordinal maps, one-hot for categoricals; gender dropped."""
    policy = policy or EncodingPolicy()
    if any(matrix.quarantine.get(lid) for lid in matrix.values.index):
        raise FeatureError("matrix has quarantined rows; run filter_complete first")
    columns, blocks, manifest, categories = [], [], {}, {}
    n = len(matrix)
    for spec in matrix.specs:
        if spec.name in policy.drop:
            continue
        raw = matrix.values[spec.name]
        if spec.kind == "categorical":
            vals = raw.astype(object).to_numpy()
            unseen = sorted(set(vals) - set(spec.levels), key=str)
            if unseen:
                raise EncodingError(f"{spec.name}: unseen level {unseen[0]!r}")
            cols = [f"{spec.name}={lvl}" for lvl in spec.levels]
            block = np.zeros((n, len(spec.levels)))
            for j, lvl in enumerate(spec.levels):
                block[:, j] = vals == lvl
        elif spec.name in policy.ordinal_maps:
            mapping = policy.ordinal_maps[spec.name]
            vals = raw.astype(object).to_numpy()
            unseen = sorted(set(vals) - set(mapping), key=str)
            if unseen:
                raise EncodingError(f"{spec.name}: unseen level {unseen[0]!r}")
            cols = [spec.name]
            block = np.array([mapping[v] for v in vals], dtype=float).reshape(n, 1)
        else:
            cols = [spec.name]
            block = pd.to_numeric(raw).to_numpy(dtype=float).reshape(n, 1)
        columns.extend(cols)
        blocks.append(block)
        manifest[spec.name] = tuple(cols)
        categories[spec.name] = spec.category
    X = np.hstack(blocks) if blocks else np.zeros((n, 0))
    y = None if matrix.labels is None else matrix.labels.to_numpy(dtype=np.int64)
    return EncodedMatrix(tuple(columns), X, y, tuple(matrix.values.index), manifest,
                         categories, dataset_id=matrix.dataset_id)


def standardize(encoded: EncodedMatrix, stats: StandardizationStats | None = None,
                tol: float = 1e-12) -> tuple[EncodedMatrix, StandardizationStats]:
    """z-score columns (population variance).

    Fresh statistics are fitted unless ``stats`` is given. Zero-variance
    columns are left as they are and flagged in ``stats.constant``.
    """
    X = encoded.X
    if stats is None:
        mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
        scale = X.std(axis=0) if len(X) else np.ones(X.shape[1])
        constant = scale <= tol * np.maximum(1.0, np.abs(mean))
        mean = np.where(constant, 0.0, mean)
        scale = np.where(constant, 1.0, scale)
        stats = StandardizationStats(tuple(encoded.columns), mean, scale, constant)
    elif tuple(stats.columns) != tuple(encoded.columns):
        raise FeatureError("standardization stats were fitted on different columns")
    Z = (X - stats.mean) / stats.scale
    return replace(encoded, X=Z, stats=stats), stats


def common_feature_view(bundles: Sequence[DatasetBundle], pass_threshold: float = 0.5
                        ) -> list[EncodedMatrix]:
    """Align datasets on (age, ed_level, n_interactions), z-scored per dataset.

    Rows are the complete, labelled learners of each dataset.
    """
    if len(bundles) < 2:
        raise FeatureError("common_feature_view needs at least two bundles")
    out = []
    for bundle in bundles:
        m = build_features(bundle, pass_threshold=pass_threshold)
        source = INTERACTIONS[bundle.dataset_id]
        missing = [c for c in ("age", "ed_level", source) if c not in m.names]
        if missing:
            raise FeatureError(f"{bundle.dataset_id} lacks common feature(s) {missing}")
        m = filter_complete(m)
        values = m.values[["age", "ed_level", source]].rename(columns={source: "n_interactions"})
        view = FeatureMatrix(tuple(SPECS[c] for c in COMMON), values, m.labels, {}, m.dataset_id)
        enc, _ = standardize(encode(view))
        out.append(replace(enc, stats=None))
    return out


def category_of_columns(encoded: EncodedMatrix) -> dict[str, SourceCategory]:
    return dict(zip(encoded.columns, encoded.column_category()))


def null_variance_features(encoded: EncodedMatrix, tol: float = 1e-12) -> list[str]:
    """Features whose every output column is constant."""
    std = encoded.X.std(axis=0) if encoded.n_rows else np.zeros(len(encoded.columns))
    const = std <= tol
    return [f for f, idx in encoded.groups() if all(const[i] for i in idx)]
