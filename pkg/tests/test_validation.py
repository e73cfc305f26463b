import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import encoded
from studperf.learners import (METRICS, CVSpec, FoldError, ModelSpec, compute_metrics,
                               confusion_matrix, cross_validate, derive_seed, expand_grid,
                               grid_search, stratified_kfold, stratified_split)
from studperf.resample import BalanceSpec

# -- metrics ----------------------------------------------------------------


def test_hand_computed_confusion():
    m = compute_metrics({"tp": 3, "fp": 1, "tn": 4, "fn": 2})
    assert round(m.accuracy, 2) == 70.00
    assert round(m.precision, 2) == 70.83  # ((3/4) + (4/6)) / 2


def test_perfect_and_all_wrong_predictions():
    y = np.array([0, 1, 1, 0, 1])
    perfect = compute_metrics(confusion_matrix(y, y))
    assert all(v == 100.0 for v in perfect.as_dict().values())
    assert compute_metrics(confusion_matrix(y, 1 - y)).accuracy == 0.0


def test_undefined_precision_is_flagged_and_zero():
    m = compute_metrics([[5, 0], [3, 0]])  # never predicts class 1
    assert any("precision undefined for class 1" in f for f in m.flags)
    assert m.precision == pytest.approx(100 * (5 / 8) / 2)


def test_weighted_average_recall_equals_accuracy():
    m = compute_metrics([[40, 10], [5, 20]], average="weighted")
    assert m.recall == pytest.approx(m.accuracy)


def test_metrics_reject_bad_confusion():
    with pytest.raises(ValueError):
        compute_metrics([[0, 0], [0, 0]])
    with pytest.raises(ValueError):
        compute_metrics([[1, -1], [0, 1]])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=4, max_size=4).filter(lambda c: sum(c) > 0),
       st.sampled_from(["macro", "weighted"]))
def test_metrics_stay_in_range(cells, average):
    m = compute_metrics(np.array(cells).reshape(2, 2), average)
    assert all(0.0 <= v <= 100.0 for v in m.as_dict().values())


# -- folds ------------------------------------------------------------------


def test_balanced_twenty_rows_give_one_of_each_per_fold():
    y = np.array([0, 1] * 10)
    for fold in stratified_kfold(y, 10, seed=3):
        assert sorted(y[fold]) == [0, 1]


def test_folds_are_a_partition_and_reproducible():
    y = np.random.default_rng(0).integers(0, 2, 57)
    folds = stratified_kfold(y, 10, seed=9)
    allidx = np.concatenate(folds)
    assert sorted(allidx) == list(range(57))
    again = stratified_kfold(y, 10, seed=9)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))


def test_fold_errors():
    with pytest.raises(FoldError, match="class 1"):
        stratified_kfold(np.array([0] * 20 + [1] * 3), 5)
    with pytest.raises(FoldError):
        stratified_kfold(np.array([0, 1] * 5), 1)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10_000), st.integers(0, 60), st.integers(0, 60))
def test_fold_stratification_property(k, seed, extra0, extra1):
    y = np.array([0] * (k + extra0) + [1] * (k + extra1))
    folds = stratified_kfold(y, k, seed)
    assert sorted(np.concatenate(folds)) == list(range(len(y)))
    for c in (0, 1):
        per = [int((y[f] == c).sum()) for f in folds]
        assert max(per) - min(per) <= 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_stratified_split_proportions():
    y = np.array([0] * 80 + [1] * 20)
    train, test = stratified_split(y, 0.2, seed=1)
    assert len(np.intersect1d(train, test)) == 0
    assert len(train) + len(test) == 100
    assert (y[test] == 1).sum() == 4 and (y[test] == 0).sum() == 16


def test_derive_seed_is_stable_and_key_sensitive():
    assert derive_seed(0, "a", 1) == derive_seed(0, "a", 1)
    assert derive_seed(0, "a", 1) != derive_seed(0, "a", 2)
    assert derive_seed(0, "a") != derive_seed(1, "a")
    assert 0 <= derive_seed(123, "x") < 2 ** 32


# -- cross-validation -------------------------------------------------------


def _data(seed=0, n=80):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, 3))
    y = (A[:, 0] + 0.5 * rng.normal(size=n) > 0.4).astype(int)
    return encoded(A, y)


def test_cv_report_aggregates_fold_values():
    rep = cross_validate(_data(), ModelSpec("dt", {"max_depth": 2}), k=5, seed=1)
    assert rep.k == 5
    for m in METRICS:
        assert rep.mean(m) == pytest.approx(np.mean(rep.values(m)))
        assert rep.std(m) == pytest.approx(np.std(rep.values(m), ddof=1))
    assert rep.confusion.sum() == 80
    lines = rep.to_csv_text().splitlines()
    assert len(lines) == 1 + 5 + 1 and lines[-1].startswith("aggregate")


def test_cv_is_byte_identical_on_rerun():
    spec = ModelSpec("rf", {"n_trees": 5})
    bal = BalanceSpec("smote", smote_k=3)
    a = cross_validate(_data(), spec, bal, k=4, seed=2).to_csv_text()
    b = cross_validate(_data(), spec, bal, k=4, seed=2).to_csv_text()
    assert a == b


def test_majority_classifier_scores_majority_share():
    X = _data(3, 100)
    share = 100 * max(np.mean(X.y), 1 - np.mean(X.y))
    rep = cross_validate(X, ModelSpec("majority"), k=10, seed=0)
    assert rep.mean("accuracy") == pytest.approx(share, abs=1.0)


@pytest.mark.parametrize("technique", ["none", "upsample", "downsample", "up_and_down", "smote"])
def test_train_fold_balancing_never_sees_test_rows(technique):
    X = _data(4, 70)
    seen = []

    def check(i, train, test):
        train_tags = set(train.provenance.ravel()) - {-1}
        test_tags = set(test.provenance[:, 0])
        seen.append(len(train_tags & test_tags))
        if technique != "none":
            assert (train.y == 0).sum() == (train.y == 1).sum()

    rep = cross_validate(X, ModelSpec("dt"), BalanceSpec(technique, smote_k=3), k=5, seed=0, on_fold=check)
    assert seen == [0] * 5
    assert rep.leaked_rows == 0


def test_whole_dataset_upsampling_is_reported_as_leaking():
    rep = cross_validate(_data(5, 70), ModelSpec("dt"),
                         BalanceSpec("upsample", scope="whole-dataset"), k=5, seed=0)
    assert rep.leaked_rows > 0
    assert rep.meta["scope"] == "whole-dataset"


def test_standardization_is_fitted_on_training_rows_only():
    X = _data(6, 40)
    means = []

    def grab(i, train, test):
        means.append(train.X.mean(axis=0))

    CVSpec(k=4, seed=0).run(X, ModelSpec("svm", {"C": 1.0}), on_fold=grab)
    # every fold's training mean differs from the full-data mean
    assert all(not np.allclose(m, X.X.mean(axis=0)) for m in means)


# -- grid search ------------------------------------------------------------


def test_expand_grid_is_lexicographic():
    pts = expand_grid({"min_samples_leaf": [1, 2], "max_depth": [3, None]})
    assert pts == [{"max_depth": 3, "min_samples_leaf": 1}, {"max_depth": 3, "min_samples_leaf": 2},
                   {"max_depth": None, "min_samples_leaf": 1}, {"max_depth": None, "min_samples_leaf": 2}]


def test_singleton_grid_returns_its_point():
    res = grid_search(_data(), "dt", {"max_depth": [4]}, k=4)
    assert res.best_params == {"max_depth": 4}
    assert len(res.table) == 1


def test_empty_grid_is_rejected():
    with pytest.raises(ValueError):
        grid_search(_data(), "dt", {"max_depth": []}, k=4)


def test_depth_three_beats_depth_one_on_xor():
    rng = np.random.default_rng(0)
    A = rng.integers(0, 2, size=(80, 2)).astype(float)
    y = A[:, 0].astype(int) ^ A[:, 1].astype(int)
    res = grid_search(encoded(A, y), "dt", {"max_depth": [1, 3]}, k=5)
    scores = dict((p["max_depth"], s) for p, s in res.scores())
    assert res.best_params == {"max_depth": 3}
    assert scores[3] == 100.0 and scores[1] < 100.0


def test_grid_tie_goes_to_first_point():
    X = encoded(np.arange(20.0), [0] * 10 + [1] * 10)
    res = grid_search(X, "dt", {"max_depth": [5, 1, 3]}, k=5)
    assert len({s for _, s in res.scores()}) == 1
    assert res.best_params == {"max_depth": 5}


def test_parallel_grid_equals_serial():
    X = _data(7)
    grid = {"max_depth": [1, 2, 3]}
    a = grid_search(X, "dt", grid, k=4, seed=1, n_jobs=1)
    b = grid_search(X, "dt", grid, k=4, seed=1, n_jobs=2)
    assert a.scores() == b.scores() and a.best_params == b.best_params
