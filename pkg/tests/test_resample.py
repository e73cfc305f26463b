import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import encoded
from studperf.resample import TECHNIQUES, BalanceError, BalanceSpec, class_counts, rebalance


def segment_residual(p, a, b):
    """Distance from p to the segment [a, b]."""
    d = b - a
    denom = d @ d
    u = 0.0 if denom == 0 else float(np.clip((p - a) @ d / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + u * d)))


def nearest_minority(Xm, k):
    mu, sd = Xm.mean(axis=0), Xm.std(axis=0)
    Z = (Xm - mu) / np.where(sd > 0, sd, 1.0)
    out = []
    for i in range(len(Z)):
        d = [(float(((Z[i] - Z[j]) ** 2).sum()), j) for j in range(len(Z)) if j != i]
        d.sort()
        out.append({j for _, j in d[:k]} | {j for dist, j in d if dist == d[k - 1][0]})
    return out


def fixture_10_4():
    rng = np.random.default_rng(0)
    return encoded(rng.normal(size=(14, 2)), [0] * 10 + [1] * 4)


def test_upsample_example():
    X = fixture_10_4()
    out = rebalance(X, BalanceSpec("upsample", seed=1))
    assert class_counts(out.y) == (10, 10)
    added = out.X[14:]
    minority = X.X[X.y == 1]
    assert all(any(np.array_equal(r, m) for m in minority) for r in added)


def test_up_and_down_example():
    out = rebalance(fixture_10_4(), BalanceSpec("up_and_down", seed=1))
    assert class_counts(out.y) == (7, 7)


def test_smote_on_diagonal_pair():
    X = encoded([[0.0, 0.0], [1.0, 1.0], [5, 0], [6, 1], [7, 2], [8, 3]], [1, 1, 0, 0, 0, 0])
    out = rebalance(X, BalanceSpec("smote", seed=2, smote_k=1))
    synth = out.X[6:]
    assert len(synth) == 2
    assert np.allclose(synth[:, 0], synth[:, 1])
    assert ((synth >= 0) & (synth <= 1)).all()


def test_none_is_identity():
    X = fixture_10_4()
    assert rebalance(X, BalanceSpec("none")) is X


def test_errors():
    X = encoded([[0.0], [1.0]], [0, 0])
    with pytest.raises(BalanceError):
        rebalance(X, BalanceSpec("upsample"))
    with pytest.raises(BalanceError):
        rebalance(fixture_10_4(), BalanceSpec("smote", smote_k=4))
    with pytest.raises(BalanceError):
        BalanceSpec("smote", smote_k=0)
    with pytest.raises(BalanceError):
        BalanceSpec("bootstrap")


# (seed, minority size, majority size, columns) with the majority strictly larger
labelled = st.tuples(st.integers(0, 10_000), st.integers(2, 12), st.integers(1, 20),
                     st.integers(1, 4)).map(lambda c: (c[0], c[1], c[1] + c[2], c[3]))


@settings(max_examples=80, deadline=None)
@given(labelled, st.sampled_from(TECHNIQUES[1:]))
def test_balanced_counts_and_determinism(case, technique):
    seed, n_min, n_maj, p = case
    rng = np.random.default_rng(seed)
    y = rng.permutation([1] * n_min + [0] * n_maj)
    X = encoded(rng.normal(size=(len(y), p)), y)
    spec = BalanceSpec(technique, seed=seed, smote_k=1)
    a, b = rebalance(X, spec), rebalance(X, spec)
    zeros, ones = class_counts(a.y)
    assert zeros == ones
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert np.array_equal(a.provenance, b.provenance)


@settings(max_examples=80, deadline=None)
@given(labelled, st.integers(1, 3))
def test_smote_points_lie_on_neighbour_segments(case, k):
    seed, n_min, n_maj, p = case
    if k >= n_min:
        k = n_min - 1
    rng = np.random.default_rng(seed)
    y = np.array([1] * n_min + [0] * n_maj)
    X = encoded(rng.normal(size=(len(y), p)) * [10.0 ** j for j in range(p)], y)
    out = rebalance(X, BalanceSpec("smote", seed=seed, smote_k=k))
    minority = np.flatnonzero(y == 1)
    neighbours = nearest_minority(X.X[minority], k)
    pos = {int(r): i for i, r in enumerate(minority)}
    for row, (origin, nb) in zip(out.X[len(y):], out.provenance[len(y):]):
        assert origin in pos and nb in pos
        assert pos[int(nb)] in neighbours[pos[int(origin)]]
        scale = max(1.0, float(np.abs(X.X).max()))
        assert segment_residual(row, X.X[origin], X.X[nb]) < 1e-9 * scale
    assert (out.y[len(y):] == 1).all()


@settings(max_examples=80, deadline=None)
@given(labelled)
def test_downsample_keeps_a_subset(case):
    seed, n_min, n_maj, p = case
    rng = np.random.default_rng(seed)
    y = rng.permutation([1] * n_min + [0] * n_maj)
    X = encoded(rng.normal(size=(len(y), p)), y)
    out = rebalance(X, BalanceSpec("downsample", seed=seed))
    origins = out.provenance[:, 0]
    assert len(set(origins)) == len(origins)
    assert np.array_equal(out.X, X.X[origins])
    assert np.array_equal(out.y, X.y[origins])
    assert (out.provenance[:, 1] == -1).all()
