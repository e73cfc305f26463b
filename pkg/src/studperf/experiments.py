"""Experiment runners: balancing, model comparison, transfer, source ablation,
feature selection and descriptive summaries, plus report rendering.

Every cell gets its seed from the root seed and the cell's coordinates, so a
worker pool can evaluate cells in any order without changing the output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import os
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from . import __version__
from .features import (CATEGORY_ORDER, SPECS, EncodedMatrix, SourceCategory, build_features,
                       common_feature_view, derive_labels, encode, filter_complete,
                       null_variance_features, standardize)
from .ingest import DatasetBundle, load_canvas, load_d1, load_oulad
from .learners.metrics import METRICS, MetricsReport, compute_metrics, confusion_matrix
from .learners.models import DEFAULT_GRIDS, ModelSpec, feature_importance
from .learners.validation import (CVSpec, derive_seed, grid_search, origins, stratified_split)
from .resample import TECHNIQUES, BalanceSpec, rebalance
from . import selection as sel

logger = logging.getLogger(__name__)

EXPERIMENTS = ("balancing", "models", "sources", "transfer", "selection", "describe")
TABLE_NAMES = {"none": "baseline", "upsample": "upsample", "downsample": "downsample",
               "up_and_down": "up_and_down", "smote": "smote"}


class ExperimentError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings of one run.

    ``balance`` is the technique used by every experiment except the
    balancing comparison, which runs each entry of ``techniques``.
    """

    experiment: str = "balancing"
    datasets: Mapping = field(default_factory=dict)  # name -> loader entry
    models: tuple = ("dt", "rf", "svm")
    techniques: tuple = TECHNIQUES
    balance: str = "up_and_down"
    scope: str = "train-folds"
    smote_k: int = 5
    categories: tuple | None = None
    target: str | None = None
    seed: int = 0
    folds: int = 10
    average: str = "macro"
    grids: Mapping = field(default_factory=lambda: dict(DEFAULT_GRIDS))
    test_fraction: float = 0.2
    pass_threshold: float = 0.5
    jobs: int = 1
    out: str = "results"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if int(self.folds) < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        for t in (*self.techniques, self.balance):
            if t not in TECHNIQUES:
                raise ConfigError(f"unknown balancing technique {t!r}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")

    def grid(self, family: str) -> dict:
        return dict(self.grids.get(family, DEFAULT_GRIDS[family]))

    def balance_spec(self, technique: str | None = None) -> BalanceSpec:
        return BalanceSpec(technique or self.balance, 0, self.smote_k, self.scope)

    def cv(self, technique: str | None = None, seed: int | None = None) -> CVSpec:
        return CVSpec(self.folds, self.seed if seed is None else seed,
                      self.balance_spec(technique), self.average)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grids"] = {k: dict(v) for k, v in self.grids.items()}
        d["datasets"] = {k: dict(v) for k, v in self.datasets.items()}
        return json.loads(json.dumps(d, default=list))

    def digest(self) -> str:
        """sha256 of every setting that can change a result (``jobs`` and ``out`` cannot)."""
        d = self.to_dict()
        d.pop("jobs")
        d.pop("out")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def config_from_dict(d: Mapping) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config field(s) {sorted(unknown)}")
    d = dict(d)
    if isinstance(d.get("datasets"), (list, tuple)):
        d["datasets"] = {name: {"kind": name} for name in d["datasets"]}
    for k in ("models", "techniques", "categories"):
        if d.get(k) is not None:
            d[k] = tuple(d[k])
    return ExperimentConfig(**d)


# ---------------------------------------------------------------------------
# result tables


@dataclass
class ResultTable:
    """A captioned grid of cells; floats are kept rounded to ``decimals``.

    ``reports`` maps ``(row, column)`` to the MetricsReport behind the cell
    (not serialized); ``leaked_rows`` totals their provenance overlaps.
    """

    name: str
    caption: str
    row_labels: list
    column_labels: list
    cells: list
    decimals: int = 2
    provenance: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict, repr=False, compare=False)
    leaked_rows: int = 0

    def __post_init__(self):
        if len(self.cells) != len(self.row_labels):
            raise ValueError(f"{self.name}: {len(self.cells)} rows for {len(self.row_labels)} labels")
        for row in self.cells:
            if len(row) != len(self.column_labels):
                raise ValueError(f"{self.name}: ragged row")
        self.cells = [[self._clean(v) for v in row] for row in self.cells]

    def _clean(self, v):
        if isinstance(v, (bool, np.bool_)):
            return str(v)
        if isinstance(v, (int, np.integer)):
            return int(v)
        if isinstance(v, (float, np.floating)):
            return float("nan") if np.isnan(v) else round(float(v), self.decimals)
        return "" if v is None else str(v)

    def _fmt(self, v) -> str:
        if isinstance(v, float):
            return "" if np.isnan(v) else f"{v:.{self.decimals}f}"
        return str(v)

    def cell(self, row, column):
        return self.cells[self.row_labels.index(row)][self.column_labels.index(column)]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.cells, index=self.row_labels, columns=self.column_labels)

    def _header(self) -> str:
        return json.dumps(self.provenance, sort_keys=True, separators=(",", ":"), default=str)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# caption: {self.caption}\n")
        buf.write(f"# decimals: {self.decimals}\n")
        buf.write(f"# provenance: {self._header()}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["", *self.column_labels])
        for label, row in zip(self.row_labels, self.cells):
            w.writerow([label, *[self._fmt(v) for v in row]])
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = [f"<!-- provenance: {self._header()} -->", "", f"**{self.caption}**", ""]
        lines.append("| | " + " | ".join(map(str, self.column_labels)) + " |")
        lines.append("|---" * (len(self.column_labels) + 1) + "|")
        for label, row in zip(self.row_labels, self.cells):
            lines.append(f"| {label} | " + " | ".join(self._fmt(v) for v in row) + " |")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, name: str, text: str) -> "ResultTable":
        meta, body = {}, []
        for line in text.splitlines(keepends=True):
            if line.startswith("# ") and not body:
                key, _, value = line[2:].rstrip("\n").partition(": ")
                meta[key] = value
            else:
                body.append(line)
        rows = list(csv.reader(io.StringIO("".join(body))))
        columns = rows[0][1:]
        labels, cells = [], []
        for r in rows[1:]:
            labels.append(r[0])
            cells.append([_parse_cell(v) for v in r[1:]])
        return cls(name, meta.get("caption", ""), labels, columns, cells,
                   int(meta.get("decimals", 2)), json.loads(meta.get("provenance", "{}")))


def _parse_cell(v: str):
    if v == "":
        return float("nan")
    if re.fullmatch(r"-?\d+", v):
        return int(v)
    try:
        return float(v)
    except ValueError:
        return v


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_") or "table"


def emit_report(tables: Sequence[ResultTable], outdir, experiment: str,
                manifest: Mapping | None = None) -> list[Path]:
    """Write ``<outdir>/<experiment>/<name>.md`` and ``.csv`` per table plus ``manifest.json``."""
    if not tables:
        raise ValueError("nothing to report")
    target = Path(outdir) / experiment
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for t in tables:
        stem = target / _safe_name(t.name)
        stem.with_suffix(".csv").write_text(t.to_csv_text())
        stem.with_suffix(".md").write_text(t.to_markdown())
        written += [stem.with_suffix(".csv"), stem.with_suffix(".md")]
    if manifest is not None:
        path = target / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
        written.append(path)
    return written


def provenance(config: ExperimentConfig, bundles: Mapping[str, DatasetBundle] | None = None) -> dict:
    return {
        "experiment": config.experiment,
        "config_digest": config.digest(),
        "seed": config.seed,
        "folds": config.folds,
        "version": __version__,
        "inputs": {k: b.digest()[:16] for k, b in (bundles or {}).items()},
    }


def _table_from_reports(name, caption, rows, columns, reports: dict, metric_of, prov, decimals=2):
    cells = [[metric_of(reports[(r, c)], r, c) for c in columns] for r in rows]
    leaked = sum(rep.leaked_rows for rep in reports.values())
    return ResultTable(name, caption, list(rows), list(columns), cells, decimals, prov, reports, leaked)


def _run_cells(jobs: list, n_jobs: int) -> list:
    """Evaluate ``(function, args)`` jobs, in parallel when ``n_jobs`` != 1."""
    if n_jobs == 1 or len(jobs) <= 1:
        return [fn(*args) for fn, args in jobs]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(*args) for fn, args in jobs)


def _best_cv(X: EncodedMatrix, family: str, grid: dict, cv: CVSpec) -> MetricsReport:
    """Report of the best grid point; its params are kept in ``meta``."""
    res = grid_search(X, family, grid, cv.k, cv.seed, cv.balance, cv.average)
    report = res.best_report
    report.meta["best_params"] = res.best_params
    return report


# ---------------------------------------------------------------------------
# experiments


def _common_views(bundles: Mapping[str, DatasetBundle], config: ExperimentConfig) -> dict:
    views = common_feature_view(list(bundles.values()), config.pass_threshold)
    return dict(zip(bundles, views))


def run_balancing_comparison(bundles: Mapping[str, DatasetBundle],
                             config: ExperimentConfig) -> list[ResultTable]:
    """One table per balancing technique: metrics (rows) by dataset (columns), DT on common features."""
    views = _common_views(bundles, config)
    names = list(views)
    keys = list(itertools.product(config.techniques, names))
    jobs = [(_best_cv, (views[ds], "dt", config.grid("dt"),
                        config.cv(tech, derive_seed(config.seed, "balancing", ds, tech))))
            for tech, ds in keys]
    results = dict(zip(keys, _run_cells(jobs, config.jobs)))
    prov = provenance(config, bundles)
    tables = []
    for tech in config.techniques:
        reports = {(m, ds): results[(tech, ds)] for m in METRICS for ds in names}
        tables.append(_table_from_reports(
            TABLE_NAMES[tech], f"Decision tree on common features, balancing: {TABLE_NAMES[tech]}",
            METRICS, names, reports, lambda rep, m, c: rep.mean(m), prov))
    return tables


def run_model_comparison(bundles: Mapping[str, DatasetBundle],
                         config: ExperimentConfig) -> tuple[ResultTable, ResultTable]:
    """Mean accuracy per (model, dataset) and the per-fold dispersion behind it."""
    views = _common_views(bundles, config)
    names = list(views)
    keys = list(itertools.product(config.models, names))
    jobs = [(_best_cv, (views[ds], fam, config.grid(fam),
                        config.cv(seed=derive_seed(config.seed, "models", ds, fam))))
            for fam, ds in keys]
    reports = dict(zip(keys, _run_cells(jobs, config.jobs)))
    prov = provenance(config, bundles)
    mean = _table_from_reports("accuracy", "Mean cross-validated accuracy by model and dataset",
                               config.models, names, reports, lambda r, *_: r.mean("accuracy"), prov)
    cols = [f"{ds} {stat}" for ds in names for stat in ("std", "stderr")]
    cells = [[getattr(reports[(fam, ds)], stat)("accuracy") for ds in names for stat in ("std", "stderr")]
             for fam in config.models]
    disp = ResultTable("dispersion", "Across-fold dispersion of accuracy (sample std and std error)",
                       list(config.models), cols, cells, 2, prov,
                       {(f, c): reports[(f, c.split()[0])] for f in config.models for c in cols},
                       mean.leaked_rows)
    return mean, disp


def _transfer_source(X: EncodedMatrix, family: str, config: ExperimentConfig, ds: str):
    """Split, tune on the training part, and fit on its balanced version."""
    split_seed = derive_seed(config.seed, "transfer", ds, "split")
    train_idx, test_idx = stratified_split(X.y, config.test_fraction, split_seed)
    train = X.take(train_idx)
    cv = config.cv(seed=derive_seed(config.seed, "transfer", ds, family))
    best = grid_search(train, family, config.grid(family), cv.k, cv.seed, cv.balance, cv.average).best_params
    fitted = rebalance(train, config.balance_spec().with_seed(derive_seed(config.seed, "transfer", ds, "balance")))
    train_s, stats = standardize(fitted)
    model = ModelSpec(family, best).fit(train_s, seed=derive_seed(config.seed, "transfer", ds, family, "fit"))
    return model, stats, best, origins(fitted)


def run_transfer_matrix(bundles: Mapping[str, DatasetBundle],
                        config: ExperimentConfig) -> list[ResultTable]:
    """Accuracy of a model trained on dataset i and tested on dataset j's held-out split."""
    views = _common_views(bundles, config)
    names = list(views)
    tests = {}
    for ds, X in views.items():
        _, test_idx = stratified_split(X.y, config.test_fraction,
                                       derive_seed(config.seed, "transfer", ds, "split"))
        tests[ds] = X.take(test_idx)
    keys = list(itertools.product(config.models, names))
    jobs = [(_transfer_source, (views[ds], fam, config, ds)) for fam, ds in keys]
    fitted = dict(zip(keys, _run_cells(jobs, config.jobs)))
    prov = provenance(config, bundles)
    tables = []
    for fam in config.models:
        reports = {}
        for src, dst in itertools.product(names, names):
            model, stats, params, train_origins = fitted[(fam, src)]
            test = tests[dst]
            test_s, _ = standardize(test, stats)
            cm = confusion_matrix(test.y, model.predict(test_s))
            leaked = len(np.intersect1d(train_origins, origins(test))) if src == dst else 0
            reports[(src, dst)] = MetricsReport([compute_metrics(cm, config.average)], [cm],
                                                config.average, leaked, {"params": params})
        tables.append(_table_from_reports(
            f"transfer_{fam}", f"Transfer accuracy for {fam}: train on row dataset, test on column dataset",
            names, names, reports, lambda r, *_: r.mean("accuracy"), prov))
    return tables


def _present_categories(X: EncodedMatrix) -> list[SourceCategory]:
    have = {SourceCategory(c) for c in X.categories.values()}
    return [c for c in CATEGORY_ORDER if c in have]


def subset_label(subset) -> str:
    return "+".join(str(SourceCategory(c)) for c in subset)


def _ablation_row(X: EncodedMatrix, subset, config: ExperimentConfig):
    sub = X.select_categories(subset)
    cv = config.cv()
    report = _best_cv(sub, "dt", config.grid("dt"), cv)
    fitted = rebalance(sub, config.balance_spec().with_seed(derive_seed(config.seed, "ablation", "fit")))
    model = ModelSpec("dt", report.meta["best_params"]).fit(standardize(fitted)[0], seed=config.seed)
    return report, feature_importance(model, level="category")


def encoded_features(bundle: DatasetBundle, config: ExperimentConfig) -> EncodedMatrix:
    return encode(filter_complete(build_features(bundle, pass_threshold=config.pass_threshold)))


def run_source_ablation(bundle: DatasetBundle, categories, config: ExperimentConfig,
                        X: EncodedMatrix | None = None) -> tuple[ResultTable, ResultTable]:
    """Cross-validated metrics for every non-empty combination of source categories.

    All rows share the root seed, so they differ only in their columns. The
    second table splits the importance of a DT fitted on all (balanced) rows
    by category, in percent.
    """
    X = encoded_features(bundle, config) if X is None else X
    present = _present_categories(X)
    wanted = present if categories is None else [SourceCategory(c) for c in categories]
    absent = [str(c) for c in wanted if c not in present]
    if absent:
        raise ExperimentError(f"{bundle.dataset_id} has no features in categor(ies) {absent}")
    wanted = [c for c in CATEGORY_ORDER if c in wanted]
    subsets = [s for r in range(1, len(wanted) + 1) for s in itertools.combinations(wanted, r)]
    jobs = [(_ablation_row, (X, s, config)) for s in subsets]
    out = _run_cells(jobs, config.jobs)
    labels = [subset_label(s) for s in subsets]
    prov = provenance(config, {bundle.dataset_id: bundle})
    reports = {(lab, m): rep for lab, (rep, _) in zip(labels, out) for m in METRICS}
    table = _table_from_reports("sources", f"Source combinations on {bundle.dataset_id}",
                                labels, METRICS, reports, lambda r, lab, m: r.mean(m), prov)
    cat_cols = [str(c) for c in wanted]
    imp_cells = [[100.0 * imp.get(c, 0.0) for c in cat_cols] for _, imp in out]
    importance = ResultTable("importance", f"Importance share by category (%) on {bundle.dataset_id}",
                             labels, cat_cols, imp_cells, 2, prov)
    return table, importance


def run_selection_analysis(bundle: DatasetBundle, config: ExperimentConfig,
                           X: EncodedMatrix | None = None) -> tuple[dict, list[ResultTable]]:
    """Wrappers (FE, BE, RFECV) and filters (ANOVA F, Kendall, Pearson) on one dataset.

    Null-variance features are dropped first and listed in the output. The
    wrapped model is a DT with hyperparameters tuned once by grid search.
    """
    X = encoded_features(bundle, config) if X is None else X
    dropped = null_variance_features(X)
    if dropped:
        logger.info("dropping null-variance feature(s) %s", dropped)
        X = X.select_features([f for f in X.features if f not in dropped])
    cv = config.cv(seed=derive_seed(config.seed, "selection"))
    params = grid_search(X, "dt", config.grid("dt"), cv.k, cv.seed, cv.balance, cv.average).best_params
    spec = ModelSpec("dt", params)
    rfecv = sel.rfe_cv(X, spec, cv)
    k = rfecv.chosen_k
    results = {
        "FE": sel.forward_elimination(X, spec, k, cv),
        "BE": sel.backward_elimination(X, spec, k, cv),
        "RFECV": rfecv,
        "ANOVA": sel.anova_f(X),
        "KENDALL": sel.kendall_tau(X),
    }
    for r in results.values():
        r.flags.update({f: "null variance" for f in dropped})
    prov = provenance(config, {bundle.dataset_id: bundle})
    prov["wrapped_model"] = spec.label()
    prov["k_rule"] = rfecv.notes
    leaked = sum(r.leaked_rows for r in results.values())

    wrappers = ResultTable(
        "wrappers", f"Wrapper selection on {bundle.dataset_id} (k = {k})", ["FE", "BE", "RFECV"],
        ["k", "selected", "excluded_null_variance"],
        [[results[m].chosen_k, " ".join(results[m].selected), " ".join(dropped)] for m in ("FE", "BE", "RFECV")],
        2, prov, leaked_rows=leaked)
    curve = ResultTable("rfecv_curve", "RFECV accuracy by number of features", [str(c[0]) for c in rfecv.curve],
                        ["mean", "std", "stderr"], [list(c[1:]) for c in rfecv.curve], 4, prov)
    steps = ResultTable(
        "wrapper_steps", "Per-step scores of the wrapper searches",
        [f"{m}:{s}" for m in ("FE", "BE", "RFECV") for s, _, _ in results[m].steps],
        ["feature", "score"],
        [[f, sc] for m in ("FE", "BE", "RFECV") for _, f, sc in results[m].steps], 4, prov)
    anova = dict((f, s) for _, f, s in results["ANOVA"].steps)
    tau = dict((f, s) for _, f, s in results["KENDALL"].steps)
    filters = ResultTable("filters", "Filter scores per encoded column", list(X.columns),
                          ["anova_f", "kendall_tau"], [[anova[c], tau[c]] for c in X.columns], 4, prov)
    R, cols, _ = sel.pearson_matrix(X)
    pearson = ResultTable("pearson", "Pearson correlation between encoded columns", cols, cols,
                          R.tolist(), 4, prov)
    results["PEARSON"] = (R, cols)
    results["dropped"] = dropped
    return results, [wrappers, steps, curve, filters, pearson]


def describe(bundle: DatasetBundle, bins: int = 10) -> list[ResultTable]:
    """Per-feature counts and histograms, overall and per class."""
    prov = {"dataset": bundle.dataset_id, "version": __version__, "input": bundle.digest()[:16]}
    summary_cols = ["kind", "count", "missing"]
    if len(bundle) == 0:
        return [ResultTable("summary", f"Feature summary of {bundle.dataset_id}", [], summary_cols, [], 2, prov)]
    m = build_features(bundle)
    labels = derive_labels(bundle).reindex(m.values.index)
    tables, summary = [], []
    hist_cols = ["lo", "hi", "count", "class_0", "class_1", "unlabelled"]
    for spec in m.specs:
        col = m.values[spec.name]
        present = col.notna().to_numpy()
        summary.append([spec.kind, int(present.sum()), int((~present).sum())])
        lab = labels.to_numpy(dtype=float, na_value=np.nan)
        rows, cells = [], []
        if spec.kind == "categorical" or (spec.kind == "ordinal" and spec.levels):
            vals = col.astype(object).to_numpy()
            for lvl in spec.levels:
                hit = present & (vals == lvl)
                rows.append(str(lvl))
                cells.append(["", "", *_class_counts(hit, lab)])
        else:
            vals = pd.to_numeric(col, errors="coerce").to_numpy(dtype=float)
            if present.any():
                edges = np.histogram_bin_edges(vals[present], bins=bins)
                which = np.clip(np.searchsorted(edges, vals, side="right") - 1, 0, bins - 1)
                for b in range(bins):
                    hit = present & (which == b)
                    rows.append(f"bin{b + 1}")
                    cells.append([edges[b], edges[b + 1], *_class_counts(hit, lab)])
        if (~present).any():
            rows.append("missing")
            cells.append(["", "", *_class_counts(~present, lab)])
        tables.append(ResultTable(f"hist_{spec.name}", f"Histogram of {spec.name}", rows, hist_cols,
                                  cells, 4, prov))
    tables.insert(0, ResultTable("summary", f"Feature summary of {bundle.dataset_id}", m.names,
                                 summary_cols, summary, 2, prov))
    return tables


def _class_counts(hit: np.ndarray, lab: np.ndarray) -> list[int]:
    return [int(hit.sum()), int((hit & (lab == 0)).sum()), int((hit & (lab == 1)).sum()),
            int((hit & np.isnan(lab)).sum())]


# ---------------------------------------------------------------------------
# datasets and dispatch


def load_dataset(entry: Mapping, name: str = "") -> DatasetBundle:
    """Load one dataset described by a config entry.

    ``kind`` is ``D1`` (CSV folder), ``D2`` (OULAD folder), ``D3`` (Canvas
    file or a folder holding one CSV) or ``synthetic`` (``plant`` holds the
    generator settings). A missing ``path`` falls back to
    ``$EDM_DATA_DIR/<kind>``.
    """
    from .synthgen import PlantSpec, generate_bundle

    kind = entry.get("kind", name)
    if kind == "synthetic":
        return generate_bundle(PlantSpec(**entry.get("plant", {})))[0]
    path = entry.get("path")
    if path is None:
        root = os.environ.get("EDM_DATA_DIR")
        if not root:
            raise ConfigError(f"dataset {name or kind}: no path given and EDM_DATA_DIR is unset")
        path = Path(root) / kind
    path = Path(path)
    if kind == "D1":
        return load_d1(path)
    if kind == "D2":
        return load_oulad(path)
    if kind == "D3":
        if path.is_dir():
            found = sorted(path.glob("*.csv"))
            if len(found) != 1:
                raise ConfigError(f"expected one CSV in {path}, found {len(found)}")
            path = found[0]
        return load_canvas(path, entry.get("label_column", "grade"))
    raise ConfigError(f"unknown dataset kind {kind!r}")


def load_datasets(config: ExperimentConfig) -> dict[str, DatasetBundle]:
    return {name: load_dataset(entry, name) for name, entry in config.datasets.items()}


def run_experiment(config: ExperimentConfig, bundles: Mapping[str, DatasetBundle]) -> list[ResultTable]:
    """Dispatch ``config.experiment`` and return every table it produced."""
    if not bundles:
        raise ExperimentError("no datasets loaded")
    digests = {k: b.digest() for k, b in bundles.items()}
    exp = config.experiment
    target = config.target or next(iter(bundles))
    if target not in bundles:
        raise ConfigError(f"target dataset {target!r} is not loaded")
    if exp == "balancing":
        tables = run_balancing_comparison(bundles, config)
    elif exp == "models":
        tables = list(run_model_comparison(bundles, config))
    elif exp == "transfer":
        tables = run_transfer_matrix(bundles, config)
    elif exp == "sources":
        tables = list(run_source_ablation(bundles[target], config.categories, config))
    elif exp == "selection":
        tables = run_selection_analysis(bundles[target], config)[1]
    else:
        tables = [replace(t, name=f"{name}_{t.name}") for name, b in bundles.items() for t in describe(b)]
    if any(bundles[k].digest() != d for k, d in digests.items()):
        raise ExperimentError("an input bundle was modified during the run")
    return tables
