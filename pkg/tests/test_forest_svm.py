import numpy as np
import pytest

from helpers import encoded, standardized
from studperf.features import build_features, encode, filter_complete
from studperf.learners import (NotStandardizedError, svm_objective, train_forest, train_svm,
                               train_tree)
from studperf.learners.models import feature_importance
from studperf.synthgen import PlantSpec, generate_bundle


def test_forest_of_one_unbootstrapped_tree_equals_the_tree():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(50, 4)), rng.integers(0, 2, 50)
    forest = train_forest(X, y, n_trees=1, bootstrap=False, max_features=None)
    tree = train_tree(X, y)
    t = forest.trees[0]
    assert np.array_equal(t.feature, tree.feature)
    assert np.array_equal(t.threshold, tree.threshold, equal_nan=True)
    assert np.array_equal(t.counts, tree.counts)
    assert (forest.predict(X) == tree.predict(X)).all()


def test_forest_is_deterministic_per_seed():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(60, 5)), rng.integers(0, 2, 60)
    a = train_forest(X, y, n_trees=7, seed=3).to_dict()
    b = train_forest(X, y, n_trees=7, seed=3).to_dict()
    c = train_forest(X, y, n_trees=7, seed=4).to_dict()
    assert a == b
    assert a != c


def test_forest_shape_and_votes():
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(40, 9)), rng.integers(0, 2, 40)
    forest = train_forest(X, y, n_trees=4, seed=0)
    assert len(forest.trees) == 4
    assert forest.max_features == 3
    votes = np.sum([t.predict(X) for t in forest.trees], axis=0)
    assert ((votes == 2) <= (forest.predict(X) == 0)).all()  # split vote -> class 0
    assert forest.importances.sum() == pytest.approx(1.0)


def test_forest_rejects_zero_trees():
    with pytest.raises(ValueError):
        train_forest(np.zeros((3, 1)), np.array([0, 1, 0]), n_trees=0)


def test_forest_ranks_planted_feature_first_across_seeds():
    hits = 0
    for seed in range(20):
        b, _ = generate_bundle(PlantSpec(n_learners=200, seed=seed, informative={"time": 1.0}, noise=0.05))
        X = encode(filter_complete(build_features(b)))
        imp = feature_importance(train_forest(X, n_trees=30, max_depth=4, seed=seed), level="feature")
        hits += max(imp, key=imp.get) == "time"
    assert hits >= 18


def test_svm_separates_two_points():
    X = standardized([[-1.0], [1.0]], [0, 1])
    model = train_svm(X, C=10.0, epochs=50)
    assert (model.predict(X) == [0, 1]).all()


def test_svm_with_zero_c_is_constant():
    rng = np.random.default_rng(0)
    X = standardized(rng.normal(size=(30, 3)), rng.integers(0, 2, 30))
    model = train_svm(X, C=0.0)
    assert np.all(model.weights == 0)
    assert len(set(model.predict(X))) == 1


def test_svm_requires_standardized_input():
    with pytest.raises(NotStandardizedError):
        train_svm(encoded([[0.0], [1.0]], [0, 1]))


def test_svm_objective_trend_is_non_increasing():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(120, 4))
    y = (A @ [1.0, -2.0, 0.5, 0.0] + 0.3 * rng.normal(size=120) > 0).astype(int)
    model = train_svm(standardized(A, y), C=1.0, epochs=40, seed=1)
    h = np.array(model.objective_history)
    assert len(h) == 40
    # single epochs wobble (stochastic order); the mean over blocks of ten never rises
    blocks = h.reshape(4, 10).mean(axis=1)
    assert np.all(np.diff(blocks) <= 0)
    assert h[-1] < h[0]


def test_svm_objective_matches_definition():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    s = np.array([1.0, -1.0])
    w, b = np.array([0.5, 0.5]), 0.0
    # hinge terms: max(0, 1 - 0.5) = 0.5 and max(0, 1 + 0.5) = 1.5
    assert svm_objective(w, b, X, s, 2.0) == pytest.approx(0.25 + 2 * 2.0)


def test_svm_is_deterministic_and_predicts_unstandardized_matrices():
    rng = np.random.default_rng(4)
    A = rng.normal(3, 2, size=(50, 2))
    y = (A[:, 0] > 3).astype(int)
    X = encoded(A, y)
    from studperf.features import standardize
    Xs, _ = standardize(X)
    m1, m2 = train_svm(Xs, C=1.0, seed=2), train_svm(Xs, C=1.0, seed=2)
    assert np.array_equal(m1.weights, m2.weights) and m1.bias == m2.bias
    assert (m1.predict(X) == m1.predict(Xs)).all()
    assert (m1.predict(Xs) == y).mean() > 0.9
