"""Small builders shared by the test modules."""

import numpy as np
import pandas as pd

from studperf.features import EncodedMatrix, SourceCategory, standardize
from studperf.ingest import bundle_from_frames


def encoded(X, y=None, names=None, categories=None):
    """EncodedMatrix with one column per feature (category D unless given)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = names or [f"f{i}" for i in range(X.shape[1])]
    categories = categories or ["D"] * len(names)
    return EncodedMatrix(
        tuple(names), X, None if y is None else np.asarray(y),
        tuple(f"r{i}" for i in range(len(X))),
        {n: (n,) for n in names},
        {n: SourceCategory(c) for n, c in zip(names, categories)},
    )


def standardized(X, y=None):
    return standardize(encoded(X, y))[0]


def tiny_course(grades=(8.0, 6.0, 10.0), final=7.0):
    """One learner, three tagged quizzes plus a final, as in-memory frames."""
    profiles = pd.DataFrame({
        "learner_id": ["a"], "age": pd.array([30], dtype="Int64"), "gender": ["F"],
        "ed_level": pd.array([3], dtype="Int64"), "ed_field": ["stem"],
        "native_lang": pd.array([True], dtype="boolean"), "motivation": ["very"],
        "descr_pos": ["x"], "descr_neg": ["y"],
    })
    quiz_items = pd.DataFrame({
        "quiz_id": ["q1", "q2", "q3", "qf"],
        "format_tag": ["visual", "verbal", "none", "none"],
        "content_tag": ["none", "none", "factual", "none"],
        "is_final": pd.array([False, False, False, True], dtype="boolean"),
    })
    attempts, events = [], []
    t = 1000
    for q, g in zip(["q1", "q2", "q3"], grades):
        attempts.append(("a", q, g, 10.0, t, t + 100, False))
        events.append(("a", q, "activity", "attempt", t))
        t += 200
    attempts.append(("a", "qf", final, 10.0, t, t + 50, True))
    events.append(("a", "qf", "activity", "attempt", t))
    qa = pd.DataFrame(attempts, columns=["learner_id", "quiz_id", "grade", "max_grade",
                                         "time_started", "time_finished", "is_final"])
    ev = pd.DataFrame(events, columns=["learner_id", "item_id", "item_kind", "action", "timestamp"])
    qr = pd.DataFrame(
        [("a", q, f"{q}_{k}", "memory" if k < 2 else "deduction", ok)
         for q, oks in {"q1": [1, 1, 0, 1], "q2": [1, 0, 1, 1], "q3": [0, 0, 1, 1]}.items()
         for k, ok in enumerate(oks)],
        columns=["learner_id", "quiz_id", "question_id", "skill_tag", "correct"])
    qr["correct"] = qr["correct"].astype(bool).astype("boolean")
    return bundle_from_frames("D1", profiles=profiles, events=ev, quiz_attempts=qa,
                              question_results=qr, quiz_items=quiz_items)
