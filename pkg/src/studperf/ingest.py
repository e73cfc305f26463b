"""Loading and validation of the three course datasets.

Every loader returns a :class:`DatasetBundle`, a set of pandas tables with a
fixed column layout:

``profiles``
    learner_id, age, gender, ed_level, ed_field, native_lang, motivation,
    descr_pos, descr_neg
``events``
    learner_id, item_id, item_kind, action, timestamp
``quiz_attempts``
    learner_id, quiz_id, grade, max_grade, time_started, time_finished, is_final
``question_results``
    learner_id, quiz_id, question_id, skill_tag, correct
``quiz_items``
    quiz_id, format_tag, content_tag, is_final
``aggregates``
    learner_id plus per-learner columns a dataset only ships pre-aggregated
    (``sum_click`` and ``final_result`` for OULAD, ``nevents`` and the grade
    columns for Canvas). Empty for the collected course.

Tables are sorted (learner_id first, then timestamp or the table's natural
key) so identical inputs always give identical bundles.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

DATASET_IDS = ("D1", "D2", "D3")

PROFILE_COLUMNS = ["learner_id", "age", "gender", "ed_level", "ed_field",
                   "native_lang", "motivation", "descr_pos", "descr_neg"]
EVENT_COLUMNS = ["learner_id", "item_id", "item_kind", "action", "timestamp"]
ATTEMPT_COLUMNS = ["learner_id", "quiz_id", "grade", "max_grade",
                   "time_started", "time_finished", "is_final"]
QUESTION_COLUMNS = ["learner_id", "quiz_id", "question_id", "skill_tag", "correct"]
QUIZ_ITEM_COLUMNS = ["quiz_id", "format_tag", "content_tag", "is_final"]

# canonical file name -> columns as written on disk
D1_FILES = {
    "learners.csv": PROFILE_COLUMNS,
    "events.csv": EVENT_COLUMNS,
    "quiz_attempts.csv": ATTEMPT_COLUMNS[:-1],
    "quiz_items.csv": QUIZ_ITEM_COLUMNS,
    "question_results.csv": QUESTION_COLUMNS,
}

GENDERS = ("F", "M", "NA")
ED_FIELDS = ("stem", "health", "humanities", "administration")
MOTIVATIONS = ("little", "moderate", "very")
MOTIVATION_ALIASES = {
    "very interested": "very",
    "moderately interested": "moderate",
    "little interest": "little",
}
ITEM_KINDS = ("activity", "resource")
ACTIONS = ("view", "attempt")
SKILL_TAGS = ("memory", "deduction")
FORMAT_TAGS = ("visual", "verbal", "none")
CONTENT_TAGS = ("factual", "practical", "none")

OULAD_FILES = ("studentInfo.csv", "studentVle.csv", "studentAssessment.csv",
               "assessments.csv", "courses.csv")
OULAD_PASS = {"Pass": 1, "Distinction": 1, "Fail": 0, "Withdrawn": 0}

CANVAS_REQUIRED = ("userid_DI", "age_DI", "LoE_DI", "nevents")

_TRUE = {"true", "1", "yes", "y", "t"}
_FALSE = {"false", "0", "no", "n", "f"}


class SchemaError(ValueError):
    """Input files do not match the expected layout."""


class ForeignKeyError(SchemaError):
    pass


class BandLabelError(SchemaError):
    pass


@dataclass(frozen=True)
class Issue:
    """A row set aside while loading (never imputed)."""

    table: str
    row: int
    kind: str
    message: str


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    dataset_id: str
    profiles: pd.DataFrame
    events: pd.DataFrame
    quiz_attempts: pd.DataFrame
    question_results: pd.DataFrame
    quiz_items: pd.DataFrame
    aggregates: pd.DataFrame = field(default_factory=lambda: pd.DataFrame({"learner_id": []}))
    provenance: tuple = ()
    issues: tuple = ()
    meta: Mapping = field(default_factory=dict)

    TABLES = ("profiles", "events", "quiz_attempts", "question_results",
              "quiz_items", "aggregates")

    @property
    def learner_ids(self) -> list[str]:
        return list(self.profiles["learner_id"])

    def __len__(self):
        return len(self.profiles)

    def equals(self, other: "DatasetBundle") -> bool:
        if self.dataset_id != other.dataset_id:
            return False
        return all(_frames_equal(getattr(self, t), getattr(other, t)) for t in self.TABLES)

    def digest(self) -> str:
        """sha256 over every table's CSV rendering; used to detect mutation."""
        h = hashlib.sha256(self.dataset_id.encode())
        for name in self.TABLES:
            h.update(name.encode())
            h.update(getattr(self, name).to_csv(index=False).encode())
        return h.hexdigest()


def _frames_equal(a: pd.DataFrame, b: pd.DataFrame) -> bool:
    if list(a.columns) != list(b.columns) or len(a) != len(b):
        return False
    if len(a) == 0:
        return True
    try:
        pd.testing.assert_frame_equal(a.reset_index(drop=True), b.reset_index(drop=True),
                                      check_dtype=False, check_exact=True)
    except AssertionError:
        return False
    return True


# ---------------------------------------------------------------------------
# parsing helpers


def _file_digest(path: Path) -> tuple[str, str]:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return path.name, h.hexdigest()


def _read_raw(path: Path, columns: Iterable[str] | None = None) -> pd.DataFrame:
    if not path.is_file():
        raise SchemaError(f"missing required file: {path.name} (looked in {path.parent})")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if columns is not None:
        absent = [c for c in columns if c not in df.columns]
        if absent:
            raise SchemaError(f"{path.name}: missing columns {absent}; found {list(df.columns)}")
        df = df[list(columns)]
    return df


def _parse_bool(value: str):
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    return pd.NA


def _blank_to_na(s: pd.Series) -> pd.Series:
    return s.where(s.str.strip() != "", pd.NA)


def _to_int(s: pd.Series) -> pd.Series:
    return pd.to_numeric(_blank_to_na(s), errors="coerce").astype("Int64")


def _normalize_motivation(value):
    if value is pd.NA or value is None:
        return pd.NA
    v = str(value).strip().lower()
    if not v:
        return pd.NA
    return MOTIVATION_ALIASES.get(v, v)


def _finish(df: pd.DataFrame, keys: list[str]) -> pd.DataFrame:
    if len(df):
        df = df.sort_values(keys, kind="mergesort")
    return df.reset_index(drop=True)


def _profiles_frame(df: pd.DataFrame) -> pd.DataFrame:
    out = pd.DataFrame({
        "learner_id": df["learner_id"].astype(str).str.strip(),
        "age": _to_int(df["age"]),
        "gender": df["gender"].str.strip().replace("", "NA"),
        "ed_level": _to_int(df["ed_level"]),
        "ed_field": _blank_to_na(df["ed_field"].str.strip()),
        "native_lang": df["native_lang"].map(_parse_bool).astype("boolean"),
        "motivation": df["motivation"].map(_normalize_motivation).astype("object"),
        "descr_pos": df["descr_pos"],
        "descr_neg": df["descr_neg"],
    })
    return _finish(out, ["learner_id"])


def _quarantine_missing(df: pd.DataFrame, table: str, required: list[str],
                        issues: list[Issue]) -> pd.DataFrame:
    blank = np.zeros(len(df), dtype=bool)
    for c in required:
        blank |= (df[c].str.strip() == "").to_numpy()
    for i in np.flatnonzero(blank):
        issues.append(Issue(table, int(i), "missing", "required field empty"))
    return df.loc[~blank]


def _numeric(df: pd.DataFrame, table: str, cols: list[str], issues: list[Issue]) -> pd.DataFrame:
    """Coerce columns to float, quarantining rows that do not parse."""
    bad = np.zeros(len(df), dtype=bool)
    parsed = {}
    for c in cols:
        v = pd.to_numeric(df[c], errors="coerce")
        bad |= v.isna().to_numpy()
        parsed[c] = v
    for pos in np.flatnonzero(bad):
        issues.append(Issue(table, int(df.index[pos]), "parse",
                            f"non-numeric value in {cols}"))
    df = df.assign(**parsed)
    return df.loc[~bad]


def _check_fk(values: pd.Series, known: set, table: str, column: str):
    for pos, v in enumerate(values):
        if v not in known:
            row = values.index[pos]
            raise ForeignKeyError(f"{table}: row {row} references unknown {column} {v!r}")


# ---------------------------------------------------------------------------
# collected course (D1)


def load_d1(directory) -> DatasetBundle:
    """Load the canonical five-file CSV set of the collected course."""
    directory = Path(directory)
    issues: list[Issue] = []
    raw = {name: _read_raw(directory / name, cols) for name, cols in D1_FILES.items()}
    provenance = tuple(_file_digest(directory / name) for name in D1_FILES)

    learners = raw["learners.csv"]
    learners = _quarantine_missing(learners, "learners", ["learner_id"], issues)
    profiles = _profiles_frame(learners)

    items = raw["quiz_items.csv"]
    quiz_items = _finish(pd.DataFrame({
        "quiz_id": items["quiz_id"].str.strip(),
        "format_tag": items["format_tag"].str.strip().replace("", "none"),
        "content_tag": items["content_tag"].str.strip().replace("", "none"),
        "is_final": items["is_final"].map(_parse_bool).astype("boolean"),
    }), ["quiz_id"])

    known_learners = set(profiles["learner_id"])
    known_quizzes = set(quiz_items["quiz_id"])

    ev = _quarantine_missing(raw["events.csv"], "events", EVENT_COLUMNS, issues)
    ev = _numeric(ev, "events", ["timestamp"], issues)
    _check_fk(ev["learner_id"].str.strip(), known_learners, "events.csv", "learner_id")
    events = _finish(pd.DataFrame({
        "learner_id": ev["learner_id"].str.strip(),
        "item_id": ev["item_id"].str.strip(),
        "item_kind": ev["item_kind"].str.strip(),
        "action": ev["action"].str.strip(),
        "timestamp": ev["timestamp"].astype("int64"),
    }), ["learner_id", "timestamp"])

    qa = _quarantine_missing(raw["quiz_attempts.csv"], "quiz_attempts", ATTEMPT_COLUMNS[:-1], issues)
    qa = _numeric(qa, "quiz_attempts", ["grade", "max_grade", "time_started", "time_finished"], issues)
    _check_fk(qa["learner_id"].str.strip(), known_learners, "quiz_attempts.csv", "learner_id")
    _check_fk(qa["quiz_id"].str.strip(), known_quizzes, "quiz_attempts.csv", "quiz_id")
    final_of = dict(zip(quiz_items["quiz_id"], quiz_items["is_final"].fillna(False)))
    attempts = pd.DataFrame({
        "learner_id": qa["learner_id"].str.strip(),
        "quiz_id": qa["quiz_id"].str.strip(),
        "grade": qa["grade"].astype(float),
        "max_grade": qa["max_grade"].astype(float),
        "time_started": qa["time_started"].astype("int64"),
        "time_finished": qa["time_finished"].astype("int64"),
    })
    attempts["is_final"] = attempts["quiz_id"].map(final_of).astype(bool)
    attempts = _finish(attempts, ["learner_id", "time_started", "quiz_id"])

    qr = _quarantine_missing(raw["question_results.csv"], "question_results", QUESTION_COLUMNS, issues)
    _check_fk(qr["learner_id"].str.strip(), known_learners, "question_results.csv", "learner_id")
    _check_fk(qr["quiz_id"].str.strip(), known_quizzes, "question_results.csv", "quiz_id")
    questions = _finish(pd.DataFrame({
        "learner_id": qr["learner_id"].str.strip(),
        "quiz_id": qr["quiz_id"].str.strip(),
        "question_id": qr["question_id"].str.strip(),
        "skill_tag": qr["skill_tag"].str.strip(),
        "correct": qr["correct"].map(_parse_bool).astype("boolean"),
    }), ["learner_id", "quiz_id", "question_id"])

    return DatasetBundle("D1", profiles, events, attempts, questions, quiz_items,
                         provenance=provenance, issues=tuple(issues))


def write_d1(bundle: DatasetBundle, directory) -> list[Path]:
    """Write ``bundle`` as the canonical CSV set; inverse of :func:`load_d1`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tables = {
        "learners.csv": bundle.profiles,
        "events.csv": bundle.events,
        "quiz_attempts.csv": bundle.quiz_attempts,
        "quiz_items.csv": bundle.quiz_items,
        "question_results.csv": bundle.question_results,
    }
    written = []
    for name, df in tables.items():
        cols = D1_FILES[name]
        out = df[cols].copy()
        for c in cols:
            if out[c].dtype == "boolean" or out[c].dtype == bool:
                out[c] = out[c].map(lambda v: "" if v is pd.NA else ("true" if v else "false"))
        path = directory / name
        out.to_csv(path, index=False, na_rep="", lineterminator="\n")
        written.append(path)
    return written


def empty_bundle(dataset_id: str = "D1") -> DatasetBundle:
    def frame(cols):
        return pd.DataFrame({c: pd.Series(dtype=object) for c in cols})
    return DatasetBundle(dataset_id, frame(PROFILE_COLUMNS), frame(EVENT_COLUMNS),
                         frame(ATTEMPT_COLUMNS), frame(QUESTION_COLUMNS),
                         frame(QUIZ_ITEM_COLUMNS))


# ---------------------------------------------------------------------------
# OULAD (D2) and Canvas Network (D3)


def load_band_map(path=None) -> dict:
    """Band-label to ordinal mapping; the packaged sidecar unless ``path`` is given."""
    if path is None:
        text = resources.files("studperf").joinpath("data/bands.json").read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)


def _map_bands(values: pd.Series, mapping: Mapping[str, int], what: str) -> pd.Series:
    unknown = sorted(set(values) - set(mapping))
    if unknown:
        raise BandLabelError(f"unknown {what} label {unknown[0]!r}")
    return values.map(mapping).astype("Int64")


def load_oulad(directory, registration_filter: Callable[[pd.DataFrame], pd.DataFrame] | None = None,
               band_map: Mapping | None = None) -> DatasetBundle:
    """Load the Open University Learning Analytics dataset.

    Parameters
    ----------
    directory : path
        Folder holding the published CSVs.
    registration_filter : callable, optional
        Applied to ``studentInfo`` before de-duplication; use it to scope the
        cohort (e.g. keep some modules only). A student registered on several
        presentations keeps the earliest one by (code_presentation, code_module).
    band_map : mapping, optional
        Replacement for the packaged band sidecar.
    """
    directory = Path(directory)
    for name in OULAD_FILES:
        if not (directory / name).is_file():
            raise SchemaError(f"missing required file: {name} (looked in {directory})")
    bands = (band_map or load_band_map())["oulad"]
    issues: list[Issue] = []
    provenance = tuple(_file_digest(directory / n) for n in OULAD_FILES)

    info = _read_raw(directory / "studentInfo.csv",
                     ["code_module", "code_presentation", "id_student", "gender",
                      "highest_education", "age_band", "final_result"])
    n_raw = len(info)
    if registration_filter is not None:
        info = registration_filter(info)
    info = info.sort_values(["id_student", "code_presentation", "code_module"], kind="mergesort")
    info = info.drop_duplicates("id_student", keep="first")

    age = _map_bands(info["age_band"], bands["age_band"], "age_band")
    ed = _map_bands(info["highest_education"], bands["highest_education"], "highest_education")
    gender = info["gender"].str.strip().str.upper().where(lambda s: s.isin(["F", "M"]), "NA")
    n = len(info)
    profiles = _finish(pd.DataFrame({
        "learner_id": info["id_student"].str.strip().to_numpy(),
        "age": age.to_numpy(),
        "gender": gender.to_numpy(),
        "ed_level": ed.to_numpy(),
        "ed_field": pd.array([pd.NA] * n, dtype=object),
        "native_lang": pd.array([pd.NA] * n, dtype="boolean"),
        "motivation": pd.array([pd.NA] * n, dtype=object),
        "descr_pos": [""] * n,
        "descr_neg": [""] * n,
    }), ["learner_id"])

    reg = info[["id_student", "code_module", "code_presentation"]]
    vle = pd.read_csv(directory / "studentVle.csv",
                      usecols=["code_module", "code_presentation", "id_student", "sum_click"],
                      dtype={"code_module": str, "code_presentation": str, "id_student": str,
                             "sum_click": float})
    clicks = vle.merge(reg, on=["id_student", "code_module", "code_presentation"])
    clicks = clicks.groupby("id_student")["sum_click"].sum()

    courses = _read_raw(directory / "courses.csv",
                        ["code_module", "code_presentation", "module_presentation_length"])
    length = reg.merge(courses, on=["code_module", "code_presentation"], how="left")
    length = length.set_index("id_student")["module_presentation_length"]

    aggregates = pd.DataFrame({
        "learner_id": info["id_student"].str.strip().to_numpy(),
        "code_module": info["code_module"].to_numpy(),
        "code_presentation": info["code_presentation"].to_numpy(),
        "final_result": info["final_result"].str.strip().to_numpy(),
    })
    aggregates["sum_click"] = aggregates["learner_id"].map(clicks).fillna(0.0).astype(float)
    aggregates["course_length"] = pd.to_numeric(aggregates["learner_id"].map(length), errors="coerce")
    aggregates = _finish(aggregates, ["learner_id"])

    assessments = _read_raw(directory / "assessments.csv",
                            ["code_module", "code_presentation", "id_assessment",
                             "assessment_type", "date", "weight"])
    sa = _read_raw(directory / "studentAssessment.csv",
                   ["id_assessment", "id_student", "date_submitted", "score"])
    sa = sa.merge(assessments, on="id_assessment", how="left")
    sa = sa.merge(reg, on=["id_student", "code_module", "code_presentation"])
    sa = _numeric(sa, "studentAssessment", ["score", "date_submitted"], issues)
    day = 86400
    attempts = _finish(pd.DataFrame({
        "learner_id": sa["id_student"].str.strip(),
        "quiz_id": sa["id_assessment"].str.strip(),
        "grade": sa["score"].astype(float),
        "max_grade": 100.0,
        "time_started": (sa["date_submitted"].astype(float) * day).astype("int64"),
        "time_finished": (sa["date_submitted"].astype(float) * day).astype("int64"),
        "is_final": (sa["assessment_type"] == "Exam").to_numpy(),
    }), ["learner_id", "time_started", "quiz_id"])

    quiz_items = _finish(pd.DataFrame({
        "quiz_id": assessments["id_assessment"].str.strip(),
        "format_tag": "none",
        "content_tag": "none",
        "is_final": (assessments["assessment_type"] == "Exam").astype("boolean"),
    }), ["quiz_id"])

    events = pd.DataFrame({c: pd.Series(dtype=object) for c in EVENT_COLUMNS})
    questions = pd.DataFrame({c: pd.Series(dtype=object) for c in QUESTION_COLUMNS})
    return DatasetBundle("D2", profiles, events, attempts, questions, quiz_items,
                         aggregates=aggregates, provenance=provenance, issues=tuple(issues),
                         meta={"raw_registrations": n_raw})


def load_canvas(file, label_column: str = "grade", band_map: Mapping | None = None) -> DatasetBundle:
    """Load the Canvas Network person-course file.

    Only age, level of education, event count and the outcome columns are
    kept. Rows whose event count does not parse are set aside in
    ``bundle.issues``; blank age or education stay missing in the profile.
    """
    file = Path(file)
    if not file.is_file():
        raise SchemaError(f"missing required file: {file.name} (looked in {file.parent})")
    bands = (band_map or load_band_map())["canvas"]
    df = pd.read_csv(file, dtype=str, keep_default_na=False, encoding="utf-8")
    required = list(CANVAS_REQUIRED) + [label_column]
    absent = [c for c in required if c not in df.columns]
    if absent:
        raise SchemaError(f"{file.name}: missing columns {absent}; available columns: {list(df.columns)}")
    n_raw = len(df)
    issues: list[Issue] = []

    df = _numeric(df, "person_course", ["nevents"], issues)
    if "course_id_DI" in df.columns:
        ids = df["userid_DI"].str.strip() + "@" + df["course_id_DI"].str.strip()
    else:
        ids = df["userid_DI"].str.strip()
    dup = ids.duplicated(keep="first").to_numpy()
    for pos in np.flatnonzero(dup):
        issues.append(Issue("person_course", int(df.index[pos]), "duplicate",
                            f"learner_id {ids.iloc[pos]!r} repeated"))
    df, ids = df.loc[~dup], ids.loc[~dup]

    def band(col, what):
        raw = df[col].str.strip()
        numeric = pd.to_numeric(raw, errors="coerce")
        out = numeric.round().astype("Int64")
        labelled = raw[(raw != "") & numeric.isna()]
        if len(labelled):
            out.loc[labelled.index] = _map_bands(labelled, bands[what], what)
        return out

    gender = df["gender"].str.strip().str.upper() if "gender" in df.columns else pd.Series("NA", index=df.index)
    gender = gender.where(gender.isin(["F", "M"]), "NA")
    n = len(df)
    profiles = _finish(pd.DataFrame({
        "learner_id": ids.to_numpy(),
        "age": band("age_DI", "age_DI").to_numpy(),
        "gender": gender.to_numpy(),
        "ed_level": band("LoE_DI", "LoE_DI").to_numpy(),
        "ed_field": pd.array([pd.NA] * n, dtype=object),
        "native_lang": pd.array([pd.NA] * n, dtype="boolean"),
        "motivation": pd.array([pd.NA] * n, dtype=object),
        "descr_pos": [""] * n,
        "descr_neg": [""] * n,
    }), ["learner_id"])

    agg = {"learner_id": ids.to_numpy(), "nevents": df["nevents"].astype(float).to_numpy()}
    for col in dict.fromkeys([label_column, "grade", "completed_%"]):
        if col in df.columns:
            agg[col] = pd.to_numeric(df[col], errors="coerce").to_numpy()
    aggregates = _finish(pd.DataFrame(agg), ["learner_id"])

    empty = empty_bundle("D3")
    return DatasetBundle("D3", profiles, empty.events, empty.quiz_attempts,
                         empty.question_results, empty.quiz_items, aggregates=aggregates,
                         provenance=(_file_digest(file),), issues=tuple(issues),
                         meta={"raw_rows": n_raw, "label_column": label_column})


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    table: str
    row: int
    message: str


@dataclass
class ValidationReport:
    dataset_id: str
    violations: list[Violation] = field(default_factory=list)
    quarantined: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.violations:
            out[v.kind] = out.get(v.kind, 0) + 1
        return out

    def first_offenders(self, per_kind: int = 5) -> dict[str, list[Violation]]:
        out: dict[str, list[Violation]] = {}
        for v in self.violations:
            bucket = out.setdefault(v.kind, [])
            if len(bucket) < per_kind:
                bucket.append(v)
        return out

    def summary(self) -> str:
        lines = [f"{self.dataset_id}: {len(self.violations)} violation(s), "
                 f"{len(self.quarantined)} quarantined row(s)"]
        for kind, items in self.first_offenders().items():
            lines.append(f"  {kind}: {self.counts()[kind]}")
            lines.extend(f"    {v.table}[{v.row}]: {v.message}" for v in items)
        return "\n".join(lines)


def _flag(out: list, mask, table: str, kind: str, message: str):
    for i in np.flatnonzero(np.asarray(mask, dtype=bool)):
        out.append(Violation(kind, table, int(i), message))


def validate_bundle(bundle: DatasetBundle) -> ValidationReport:
    """Check every table invariant; the bundle is left untouched."""
    out: list[Violation] = []
    p = bundle.profiles
    _flag(out, p["learner_id"].duplicated(keep="first"), "profiles", "duplicate", "learner_id repeated")
    if len(p):
        age = pd.to_numeric(p["age"], errors="coerce")
        lo, hi = (18, 99) if bundle.dataset_id == "D1" else (0, 120)
        _flag(out, age.notna() & ((age < lo) | (age > hi)), "profiles", "range", f"age outside [{lo}, {hi}]")
        lvl = pd.to_numeric(p["ed_level"], errors="coerce")
        _flag(out, lvl.notna() & ((lvl < 1) | (lvl > 8)), "profiles", "range", "ed_level outside [1, 8]")
        _flag(out, ~p["gender"].isin(GENDERS), "profiles", "enum", "gender not in F/M/NA")
        fld = p["ed_field"]
        _flag(out, fld.notna() & ~fld.isin(ED_FIELDS), "profiles", "enum", "unknown ed_field")
        mot = p["motivation"]
        _flag(out, mot.notna() & ~mot.isin(MOTIVATIONS), "profiles", "enum", "unknown motivation")

    learners = set(p["learner_id"])
    quizzes = set(bundle.quiz_items["quiz_id"])

    ev = bundle.events
    if len(ev):
        _flag(out, ~ev["learner_id"].isin(learners), "events", "foreign_key", "unknown learner_id")
        _flag(out, ~ev["item_kind"].isin(ITEM_KINDS), "events", "enum", "unknown item_kind")
        _flag(out, ~ev["action"].isin(ACTIONS), "events", "enum", "unknown action")
        _flag(out, (ev["item_kind"] == "resource") & (ev["action"] != "view"), "events",
              "consistency", "resource event must be a view")
        same = ev["learner_id"].eq(ev["learner_id"].shift())
        back = ev["timestamp"].astype(float).diff() < 0
        _flag(out, same & back, "events", "order", "timestamp decreases within learner")

    qa = bundle.quiz_attempts
    if len(qa):
        g, m = qa["grade"].astype(float), qa["max_grade"].astype(float)
        _flag(out, (m <= 0) | (g < 0) | (g > m), "quiz_attempts", "range", "grade outside [0, max_grade]")
        _flag(out, qa["time_finished"].astype(float) < qa["time_started"].astype(float),
              "quiz_attempts", "range", "time_finished before time_started")
        _flag(out, ~qa["learner_id"].isin(learners), "quiz_attempts", "foreign_key", "unknown learner_id")
        if quizzes:
            _flag(out, ~qa["quiz_id"].isin(quizzes), "quiz_attempts", "foreign_key", "unknown quiz_id")

    qr = bundle.question_results
    if len(qr):
        _flag(out, ~qr["learner_id"].isin(learners), "question_results", "foreign_key", "unknown learner_id")
        _flag(out, ~qr["quiz_id"].isin(quizzes), "question_results", "foreign_key", "unknown quiz_id")
        _flag(out, ~qr["skill_tag"].isin(SKILL_TAGS), "question_results", "enum", "unknown skill_tag")
        tags = qr.drop_duplicates(["quiz_id", "question_id"]).groupby("quiz_id")["skill_tag"].agg(set)
        for quiz, seen in tags.items():
            if not set(SKILL_TAGS) <= seen:
                out.append(Violation("consistency", "question_results", -1,
                                     f"quiz {quiz!r} lacks one of the skill tags"))

    items = bundle.quiz_items
    if len(items) and bundle.dataset_id == "D1":
        fmt, cnt = items["format_tag"], items["content_tag"]
        _flag(out, ~fmt.isin(FORMAT_TAGS) | ~cnt.isin(CONTENT_TAGS), "quiz_items", "enum", "unknown tag")
        final = items["is_final"].fillna(False).astype(bool)
        _flag(out, final & ((fmt != "none") | (cnt != "none")), "quiz_items", "consistency",
              "final quiz must be untagged")
        n_tags = (fmt != "none").astype(int) + (cnt != "none").astype(int)
        _flag(out, ~final & (n_tags != 1), "quiz_items", "consistency",
              "non-final quiz needs exactly one format or content tag")

    if bundle.dataset_id == "D3" and (len(qa) or len(qr)):
        out.append(Violation("dataset", "quiz_attempts", -1, "D3 bundles carry no quiz data"))

    return ValidationReport(bundle.dataset_id, out, list(bundle.issues))


def bundle_from_frames(dataset_id: str, **tables) -> DatasetBundle:
    """Assemble a bundle from in-memory frames, applying the canonical sort."""
    base = empty_bundle(dataset_id)
    keys = {
        "profiles": ["learner_id"],
        "events": ["learner_id", "timestamp"],
        "quiz_attempts": ["learner_id", "time_started", "quiz_id"],
        "question_results": ["learner_id", "quiz_id", "question_id"],
        "quiz_items": ["quiz_id"],
        "aggregates": ["learner_id"],
    }
    parts = {}
    for name in DatasetBundle.TABLES:
        df = tables.pop(name, None)
        parts[name] = getattr(base, name) if df is None else _finish(df.copy(), keys[name])
    return DatasetBundle(dataset_id, provenance=(), issues=(), **parts, **tables)
