import csv
from dataclasses import replace

import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from studperf.ingest import (BandLabelError, ForeignKeyError, SchemaError, load_canvas, load_d1,
                             load_oulad, validate_bundle, write_d1)
from studperf.synthgen import PlantSpec, generate_bundle


@pytest.fixture(scope="module")
def small_bundle():
    return generate_bundle(PlantSpec(n_learners=5, seed=11))[0]


@pytest.fixture
def d1_dir(tmp_path, small_bundle):
    write_d1(small_bundle, tmp_path)
    return tmp_path


def test_fixture_directory_loads_every_learner(d1_dir):
    b = load_d1(d1_dir)
    assert b.dataset_id == "D1"
    assert len(b) == 5
    assert [name for name, _ in b.provenance] == ["learners.csv", "events.csv", "quiz_attempts.csv",
                                                  "quiz_items.csv", "question_results.csv"]
    assert set(b.profiles["descr_pos"]) == {"curious"}


def test_round_trip_is_field_for_field(d1_dir, tmp_path_factory, small_bundle):
    first = load_d1(d1_dir)
    assert first.equals(small_bundle)
    again_dir = tmp_path_factory.mktemp("again")
    write_d1(first, again_dir)
    second = load_d1(again_dir)
    assert second.equals(first)
    assert second.digest() == first.digest()


def test_loading_is_deterministic_and_sorted(d1_dir):
    a, b = load_d1(d1_dir), load_d1(d1_dir)
    assert a.digest() == b.digest()
    ev = a.events
    assert list(ev.sort_values(["learner_id", "timestamp"], kind="mergesort").index) == list(ev.index)


def test_text_answers_are_kept_verbatim(d1_dir):
    path = d1_dir / "learners.csv"
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df.loc[0, "descr_pos"] = '  kind, "patient"  '
    df.to_csv(path, index=False)
    b = load_d1(d1_dir)
    assert b.profiles.loc[b.profiles["learner_id"] == df.loc[0, "learner_id"], "descr_pos"].item() == \
        '  kind, "patient"  '


def test_missing_file_is_named(d1_dir):
    (d1_dir / "quiz_items.csv").unlink()
    with pytest.raises(SchemaError, match="quiz_items.csv"):
        load_d1(d1_dir)


def test_dangling_learner_reference_reports_row(d1_dir):
    path = d1_dir / "events.csv"
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df.loc[3, "learner_id"] = "ghost"
    df.to_csv(path, index=False)
    with pytest.raises(ForeignKeyError, match=r"row 3 .*'ghost'"):
        load_d1(d1_dir)


def test_blank_required_field_is_quarantined(d1_dir):
    path = d1_dir / "quiz_attempts.csv"
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df.loc[2, "grade"] = ""
    df.to_csv(path, index=False)
    b = load_d1(d1_dir)
    assert len(b.quiz_attempts) == len(df) - 1
    report = validate_bundle(b)
    assert [(q.table, q.row, q.kind) for q in report.quarantined] == [("quiz_attempts", 2, "missing")]


def test_clean_bundle_validates(small_bundle):
    report = validate_bundle(small_bundle)
    assert report.ok and report.violations == []


def test_grade_above_maximum_is_one_range_violation(small_bundle):
    qa = small_bundle.quiz_attempts.copy()
    qa.loc[0, "grade"] = qa.loc[0, "max_grade"] + 1
    report = validate_bundle(replace(small_bundle, quiz_attempts=qa))
    assert report.counts() == {"range": 1}
    assert "range" in report.summary()


def _corrupt(bundle, kind, pos):
    p, ev, qa = bundle.profiles.copy(), bundle.events.copy(), bundle.quiz_attempts.copy()
    items, qr = bundle.quiz_items.copy(), bundle.question_results.copy()
    i = pos % len(p)
    if kind == "duplicate":
        p.loc[i, "learner_id"] = p.loc[(i + 1) % len(p), "learner_id"]
        return replace(bundle, profiles=p), "duplicate"
    if kind == "age":
        p.loc[i, "age"] = 12
        return replace(bundle, profiles=p), "range"
    if kind == "ed_level":
        p.loc[i, "ed_level"] = 9
        return replace(bundle, profiles=p), "range"
    if kind == "gender":
        p.loc[i, "gender"] = "X"
        return replace(bundle, profiles=p), "enum"
    j = pos % len(ev)
    if kind == "event_fk":
        ev.loc[j, "learner_id"] = "ghost"
        return replace(bundle, events=ev), "foreign_key"
    if kind == "resource_attempt":
        rows = ev.index[ev["item_kind"] == "resource"]
        ev.loc[rows[pos % len(rows)], "action"] = "attempt"
        return replace(bundle, events=ev), "consistency"
    if kind == "order":
        k = max(1, j)
        while ev.loc[k, "learner_id"] != ev.loc[k - 1, "learner_id"]:
            k = k % (len(ev) - 1) + 1
        ev.loc[k, "timestamp"] = ev.loc[k - 1, "timestamp"] - 1
        return replace(bundle, events=ev), "order"
    k = pos % len(qa)
    if kind == "grade":
        qa.loc[k, "grade"] = -1.0
        return replace(bundle, quiz_attempts=qa), "range"
    if kind == "duration":
        qa.loc[k, "time_finished"] = qa.loc[k, "time_started"] - 5
        return replace(bundle, quiz_attempts=qa), "range"
    if kind == "quiz_fk":
        qa.loc[k, "quiz_id"] = "nope"
        return replace(bundle, quiz_attempts=qa), "foreign_key"
    if kind == "final_tag":
        items.loc[items["is_final"].astype(bool), "format_tag"] = "visual"
        return replace(bundle, quiz_items=items), "consistency"
    if kind == "skill":
        qr.loc[pos % len(qr), "skill_tag"] = "intuition"
        return replace(bundle, question_results=qr), "enum"
    raise AssertionError(kind)


CORRUPTIONS = ["duplicate", "age", "ed_level", "gender", "event_fk", "resource_attempt", "order",
               "grade", "duration", "quiz_fk", "final_tag", "skill"]


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(CORRUPTIONS), st.integers(0, 10_000))
def test_every_corruption_class_is_caught(small_bundle, kind, pos):
    before = small_bundle.digest()
    broken, expected = _corrupt(small_bundle, kind, pos)
    report = validate_bundle(broken)
    assert expected in report.counts()
    assert small_bundle.digest() == before


def test_validation_does_not_mutate(small_bundle):
    before = small_bundle.digest()
    validate_bundle(small_bundle)
    assert small_bundle.digest() == before


# -- OULAD ------------------------------------------------------------------


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


@pytest.fixture
def oulad_dir(tmp_path):
    _write(tmp_path / "studentInfo.csv",
           ["code_module", "code_presentation", "id_student", "gender", "region", "highest_education",
            "imd_band", "age_band", "num_of_prev_attempts", "studied_credits", "disability", "final_result"],
           [["AAA", "2013J", "11", "M", "x", "HE Qualification", "", "55<=", "0", "60", "N", "Pass"],
            ["AAA", "2013J", "12", "F", "x", "Lower Than A Level", "", "0-35", "0", "60", "N", "Withdrawn"],
            ["BBB", "2014B", "12", "F", "x", "Lower Than A Level", "", "0-35", "1", "60", "N", "Fail"],
            ["BBB", "2013J", "13", "F", "x", "A Level or Equivalent", "", "35-55", "0", "60", "N", "Distinction"]])
    _write(tmp_path / "studentVle.csv",
           ["code_module", "code_presentation", "id_student", "id_site", "date", "sum_click"],
           [["AAA", "2013J", "11", "1", "3", "4"], ["AAA", "2013J", "11", "2", "5", "6"],
            ["AAA", "2013J", "12", "1", "3", "7"], ["BBB", "2014B", "12", "1", "3", "100"]])
    _write(tmp_path / "assessments.csv",
           ["code_module", "code_presentation", "id_assessment", "assessment_type", "date", "weight"],
           [["AAA", "2013J", "1", "TMA", "20", "50"], ["AAA", "2013J", "2", "Exam", "200", "50"],
            ["BBB", "2013J", "3", "TMA", "20", "100"]])
    _write(tmp_path / "studentAssessment.csv",
           ["id_assessment", "id_student", "date_submitted", "is_banked", "score"],
           [["1", "11", "18", "0", "80"], ["2", "11", "199", "0", "70"], ["1", "12", "19", "0", "40"],
            ["3", "13", "20", "0", "90"]])
    _write(tmp_path / "courses.csv", ["code_module", "code_presentation", "module_presentation_length"],
           [["AAA", "2013J", "268"], ["BBB", "2013J", "240"], ["BBB", "2014B", "234"]])
    return tmp_path


def test_oulad_profile_count_matches_distinct_ids(oulad_dir):
    with open(oulad_dir / "studentInfo.csv") as fh:
        distinct = {row["id_student"] for row in csv.DictReader(fh)}
    b = load_oulad(oulad_dir)
    assert b.dataset_id == "D2"
    assert len(b) == len(distinct) == 3


def test_oulad_band_mapping_and_clicks(oulad_dir):
    b = load_oulad(oulad_dir)
    prof = b.profiles.set_index("learner_id")
    assert prof.loc["11", "age"] == 60 and prof.loc["12", "age"] == 26 and prof.loc["13", "age"] == 45
    assert prof.loc["11", "ed_level"] == 4 and prof.loc["13", "ed_level"] == 3
    agg = b.aggregates.set_index("learner_id")
    # student 12 keeps the earliest presentation (2013J), so the 2014B clicks are ignored
    assert agg.loc["11", "sum_click"] == 10 and agg.loc["12", "sum_click"] == 7
    assert agg.loc["12", "final_result"] == "Withdrawn"
    assert validate_bundle(b).ok


def test_oulad_unknown_band_is_echoed(oulad_dir):
    path = oulad_dir / "studentInfo.csv"
    text = path.read_text().replace("35-55", "35-60")
    path.write_text(text)
    with pytest.raises(BandLabelError, match="35-60"):
        load_oulad(oulad_dir)


def test_oulad_empty_directory(tmp_path):
    with pytest.raises(SchemaError, match="missing required file"):
        load_oulad(tmp_path)


# -- Canvas -----------------------------------------------------------------


CANVAS_HEADER = ["course_id_DI", "userid_DI", "age_DI", "LoE_DI", "gender", "nevents", "grade", "completed_%"]


def test_canvas_three_rows(tmp_path):
    path = tmp_path / "person_course.csv"
    _write(path, CANVAS_HEADER, [["c1", "u1", "{19-34}", "Secondary", "m", "12", "0.8", "1"],
                                 ["c1", "u2", "{55 or older}", "Master's", "f", "3", "0.1", "0.2"],
                                 ["c2", "u1", "", "", "", "40", "", ""]])
    b = load_canvas(path)
    assert b.dataset_id == "D3" and len(b) == 3
    assert len(b.quiz_attempts) == 0 and len(b.question_results) == 0
    assert validate_bundle(b).ok


def test_canvas_missing_column_lists_available(tmp_path):
    path = tmp_path / "pc.csv"
    _write(path, ["userid_DI", "age_DI"], [["u1", "30"]])
    with pytest.raises(SchemaError, match="available columns: .*userid_DI"):
        load_canvas(path)


def test_canvas_bad_event_count_is_quarantined(tmp_path):
    path = tmp_path / "pc.csv"
    _write(path, CANVAS_HEADER, [["c1", "u1", "30", "2", "m", "12", "0.8", "1"],
                                 ["c1", "u2", "40", "3", "f", "many", "0.1", "0.2"]])
    b = load_canvas(path)
    assert len(b) == 1
    report = validate_bundle(b)
    assert [(q.row, q.kind) for q in report.quarantined] == [(1, "parse")]
