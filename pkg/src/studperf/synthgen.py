"""Synthetic collected-course bundles with a known feature-to-label rule.

Every feature is driven by its own independent per-learner draw and is
realised through raw events, attempts and question results, so the feature
builders are exercised end to end. The label is a thresholded linear score
of the z-scored planted features, followed by a fixed share of flips.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .ingest import ED_FIELDS, GENDERS, MOTIVATIONS, DatasetBundle, bundle_from_frames, write_d1

PLANTABLE = ("age", "ed_level", "motivation", "avrg_grade", "%_completion", "nb_action", "time",
             "visual", "verbal", "factual", "practical", "memory", "deduction")
QUIZ_TAGS = ("visual", "verbal", "factual", "practical")
FINAL_QUIZ = "q_final"
START_TIME = 1_600_000_000


class PlantError(ValueError):
    pass


@dataclass(frozen=True)
class PlantSpec:
    """What to generate.

    ``informative`` maps feature names to weights of the label score.
    ``noise`` is the share of labels flipped in each class after the rule is
    applied; ``pass_rate`` is the target share of class 1 after flipping.
    Each of the four quiz tags gets ``quizzes_per_tag`` quizzes of
    ``questions_per_quiz`` questions (half memory, half deduction), each
    preceded by one resource; a final, untagged quiz closes the course.
    """

    n_learners: int = 200
    seed: int = 0
    informative: Mapping = field(default_factory=lambda: {"time": 1.0, "verbal": 1.0})
    noise: float = 0.05
    pass_rate: float = 0.5
    quizzes_per_tag: int = 2
    questions_per_quiz: int = 6
    incomplete_rate: float = 0.0

    def __post_init__(self):
        if not self.informative:
            raise PlantError("at least one informative feature is required")
        unknown = [f for f in self.informative if f not in PLANTABLE]
        if unknown:
            raise PlantError(f"cannot plant {unknown}; choose from {PLANTABLE}")
        if not any(float(w) != 0 for w in self.informative.values()):
            raise PlantError("informative weights are all zero")
        if not 0 <= self.noise < 0.5:
            raise PlantError("noise must lie in [0, 0.5)")
        if self.n_learners < 2:
            raise PlantError("need at least two learners")
        if self.quizzes_per_tag < 1:
            raise PlantError("quizzes_per_tag must be >= 1")
        if self.questions_per_quiz < 2 or self.questions_per_quiz % 2:
            raise PlantError("questions_per_quiz must be even and >= 2")
        if not 0 <= self.incomplete_rate < 1:
            raise PlantError("incomplete_rate must lie in [0, 1)")
        pre = self.pre_noise_rate()
        if not 0 <= pre <= 1:
            raise PlantError(f"pass_rate {self.pass_rate} is unreachable with noise {self.noise}")

    def pre_noise_rate(self) -> float:
        """Class-1 share before flipping that yields ``pass_rate`` after it."""
        return (self.pass_rate - self.noise) / (1 - 2 * self.noise)


@dataclass
class GroundTruth:
    informative: dict
    means: dict
    stds: dict
    bias: float
    noise: float
    rule: str
    labels: dict  # learner_id -> label after flips (None when no final attempt)
    clean_labels: dict
    flipped: list
    values: dict  # feature -> {learner_id: realised value}

    def score(self, values: Mapping[str, float]) -> float:
        return float(sum(w * (values[f] - self.means[f]) / self.stds[f]
                         for f, w in self.informative.items()) + self.bias)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def _course(spec: PlantSpec):
    quizzes = []
    for tag in QUIZ_TAGS:
        for j in range(spec.quizzes_per_tag):
            quizzes.append((f"q{len(quizzes) + 1:02d}", tag))
    return quizzes


def _quiz_items(quizzes) -> pd.DataFrame:
    rows = []
    for qid, tag in quizzes:
        fmt = tag if tag in ("visual", "verbal") else "none"
        cnt = tag if tag in ("factual", "practical") else "none"
        rows.append((qid, fmt, cnt, False))
    rows.append((FINAL_QUIZ, "none", "none", True))
    df = pd.DataFrame(rows, columns=["quiz_id", "format_tag", "content_tag", "is_final"])
    df["is_final"] = df["is_final"].astype("boolean")
    return df


def generate_bundle(spec: PlantSpec) -> tuple[DatasetBundle, GroundTruth]:
    """Draw a bundle and the ground truth of its label rule."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_learners
    ids = [f"s{i:04d}" for i in range(n)]
    quizzes = _course(spec)
    n_res = len(quizzes)
    half = spec.questions_per_quiz // 2

    # independent per-learner draws, one per feature
    age = rng.integers(18, 66, size=n)
    ed_level = rng.integers(1, 6, size=n)
    motivation = rng.integers(0, 3, size=n)
    ability = rng.uniform(2.0, 9.5, size=n)
    pace = rng.uniform(0.5, 2.0, size=n)
    n_viewed = rng.integers(1, n_res + 1, size=n)
    extra_views = rng.integers(0, 41, size=n)
    tag_skill = {t: rng.uniform(0.1, 0.9, size=n) for t in QUIZ_TAGS}
    gender = rng.choice(GENDERS, size=n)
    ed_field = rng.choice(ED_FIELDS, size=n)
    native = rng.random(n) < 0.5
    complete = np.ones(n, dtype=bool)
    n_incomplete = int(round(spec.incomplete_rate * n))
    if n_incomplete:
        complete[rng.choice(n, size=n_incomplete, replace=False)] = False

    events, attempts, questions = [], [], []
    realised = {f: np.zeros(n) for f in PLANTABLE}
    for i, lid in enumerate(ids):
        t = START_TIME + i * 1_000_000
        viewed = set(rng.choice(n_res, size=n_viewed[i], replace=False).tolist())
        extra_at = rng.choice(sorted(viewed), size=extra_views[i], replace=True)
        repeats = np.bincount(extra_at, minlength=n_res)
        grades, durations = [], []
        per_tag = {tg: [] for tg in QUIZ_TAGS}
        per_skill = {"memory": [], "deduction": []}
        n_views = 0
        for q, (qid, tag) in enumerate(quizzes):
            if q in viewed:
                for _ in range(1 + repeats[q]):
                    events.append((lid, f"r{q + 1:02d}", "resource", "view", t))
                    t += int(rng.integers(5, 60))
                    n_views += 1
            dur = int(round(pace[i] * 600 * rng.uniform(0.8, 1.2)))
            grade = float(np.clip(np.round(ability[i] + rng.normal(0, 1.0), 1), 0.0, 10.0))
            events.append((lid, qid, "activity", "attempt", t))
            attempts.append((lid, qid, grade, 10.0, t, t + dur, False))
            grades.append(grade)
            durations.append(dur)
            for k in range(spec.questions_per_quiz):
                skill = "memory" if k < half else "deduction"
                ok = bool(rng.random() < tag_skill[tag][i])
                questions.append((lid, qid, f"{qid}_{k + 1}", skill, ok))
                per_tag[tag].append(ok)
                per_skill[skill].append(ok)
            t += dur + int(rng.integers(60, 3600))
        final_dur = int(round(pace[i] * 600 * rng.uniform(0.8, 1.2)))
        if complete[i]:
            events.append((lid, FINAL_QUIZ, "activity", "attempt", t))
            attempts.append((lid, FINAL_QUIZ, np.nan, 10.0, t, t + final_dur, True))
            durations.append(final_dur)
        realised["age"][i] = age[i]
        realised["ed_level"][i] = ed_level[i]
        realised["motivation"][i] = motivation[i]
        realised["avrg_grade"][i] = np.mean(grades)
        realised["nb_action"][i] = n_views + len(durations)
        realised["time"][i] = float(np.sum(durations))
        realised["%_completion"][i] = len(viewed) + len(quizzes) + int(complete[i])
        for tg in QUIZ_TAGS:
            realised[tg][i] = np.mean(per_tag[tg])
        for sk in per_skill:
            realised[sk][i] = np.mean(per_skill[sk])

    ev_df = pd.DataFrame(events, columns=["learner_id", "item_id", "item_kind", "action", "timestamp"])
    realised["%_completion"] = realised["%_completion"] / ev_df["item_id"].nunique()

    # label: thresholded linear score of z-scored planted features
    means = {f: float(realised[f].mean()) for f in spec.informative}
    stds = {f: float(realised[f].std()) or 1.0 for f in spec.informative}
    raw = sum(float(w) * (realised[f] - means[f]) / stds[f] for f, w in spec.informative.items())
    n_pass = int(round(spec.pre_noise_rate() * n))
    order = np.sort(raw)[::-1]
    if n_pass == 0:
        bias = -float(order[0]) - 1.0
    elif n_pass == n:
        bias = -float(order[-1]) + 1.0
    else:
        bias = -float(order[n_pass - 1] + order[n_pass]) / 2
    clean = (raw + bias >= 0).astype(int)
    label = clean.copy()
    flipped = []
    for cls in (0, 1):
        members = np.flatnonzero(clean == cls)
        n_flip = int(round(spec.noise * len(members)))
        if n_flip:
            pick = np.sort(rng.choice(members, size=n_flip, replace=False))
            label[pick] = 1 - cls
            flipped.extend(ids[j] for j in pick)

    # final grade encodes the label: >= half marks means pass
    final_grades = np.where(label == 1, rng.integers(50, 101, size=n), rng.integers(0, 50, size=n)) / 10
    att_df = pd.DataFrame(attempts, columns=["learner_id", "quiz_id", "grade", "max_grade",
                                             "time_started", "time_finished", "is_final"])
    pos = {lid: i for i, lid in enumerate(ids)}
    fin = att_df["is_final"].to_numpy()
    att_df.loc[fin, "grade"] = final_grades[att_df.loc[fin, "learner_id"].map(pos).to_numpy()]

    mot_levels = np.array(MOTIVATIONS)
    profiles = pd.DataFrame({
        "learner_id": ids,
        "age": pd.array(age, dtype="Int64"),
        "gender": gender.astype(object),
        "ed_level": pd.array(ed_level, dtype="Int64"),
        "ed_field": ed_field.astype(object),
        "native_lang": pd.array(native, dtype="boolean"),
        "motivation": mot_levels[motivation].astype(object),
        "descr_pos": ["curious"] * n,
        "descr_neg": ["busy"] * n,
    })
    qr_df = pd.DataFrame(questions, columns=["learner_id", "quiz_id", "question_id", "skill_tag", "correct"])
    qr_df["correct"] = qr_df["correct"].astype("boolean")
    bundle = bundle_from_frames("D1", profiles=profiles, events=ev_df, quiz_attempts=att_df,
                                question_results=qr_df, quiz_items=_quiz_items(quizzes))

    weights = {f: float(w) for f, w in spec.informative.items()}
    terms = " + ".join(f"{w:g} * z({f})" for f, w in weights.items())
    truth = GroundTruth(
        informative=weights, means=means, stds=stds, bias=bias, noise=spec.noise,
        rule=f"pass iff {terms} + {bias:.6g} >= 0, then {spec.noise:g} of each class flipped",
        labels={lid: (int(label[i]) if complete[i] else None) for i, lid in enumerate(ids)},
        clean_labels={lid: int(clean[i]) for i, lid in enumerate(ids)},
        flipped=flipped,
        values={f: dict(zip(ids, realised[f].tolist())) for f in PLANTABLE},
    )
    return bundle, truth


def write_bundle(bundle: DatasetBundle, truth: GroundTruth, directory) -> list[Path]:
    """Write the canonical CSV set plus ``ground_truth.json``."""
    paths = write_d1(bundle, directory)
    gt = Path(directory) / "ground_truth.json"
    gt.write_text(truth.to_json())
    return paths + [gt]
