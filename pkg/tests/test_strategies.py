import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imbench.classifiers import ClassifierSpec, ConstantModel, fit
from imbench.data import BinaryDataset, make_synthetic
from imbench.strategies import (EnsembleModel, StrategySpec, apply_smote, class_weight_vector,
                                fit_rusboost, fit_solution, fit_underbagging, smote_points)


def with_rate(n_pos, n_neg, d=2, seed=0):
    rng = np.random.default_rng(seed)
    return BinaryDataset(rng.normal(size=(n_pos + n_neg, d)), np.r_[np.ones(n_pos), np.zeros(n_neg)])


@pytest.mark.parametrize("n_pos,n_neg,w", [(1, 99, 100), (50, 50, 2), (1, 999, 1000)])
def test_class_weights(n_pos, n_neg, w):
    v = class_weight_vector(with_rate(n_pos, n_neg))
    assert v[0] == pytest.approx(w) and v[-1] == 1.0


class PinnedRng:
    def permutation(self, m):
        return np.arange(m)

    def integers(self, lo, hi, size):
        return np.zeros(size, dtype=np.int64)

    def random(self, n):
        return np.full(n, 0.5)


def test_smote_pinned_midpoint():
    ds = BinaryDataset(np.array([[0.0, 0], [1, 0], [5, 5], [6, 6], [7, 7]]), [1, 1, 0, 0, 0])
    out = apply_smote(ds, k=1, rng_seed=PinnedRng())
    assert out.features[-1].tolist() == [0.5, 0.0]


def test_smote_coincident_and_counts():
    ds = BinaryDataset(np.array([[2.0, 3.0]] * 2 + [[0.0, 0.0]] * 6), [1, 1] + [0] * 6)
    out = apply_smote(ds, 5, 1)
    assert np.all(out.features[out.index == -1] == [2.0, 3.0])
    out = apply_smote(with_rate(10, 90), 5, 0)
    assert (out.n_positive, out.n_negative) == (90, 90)


def test_smote_keeps_originals():
    ds = with_rate(10, 40)
    out = apply_smote(ds, 3, 2)
    assert np.array_equal(out.features[: len(ds)], ds.features)
    assert np.array_equal(out.index[: len(ds)], ds.index)


def test_smote_single_positive_duplicates():
    ds = with_rate(1, 5)
    out = apply_smote(ds, 5, 0)
    assert np.all(out.features[out.y == 1] == ds.features[0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 30), st.integers(1, 5), st.integers(1, 7))
def test_smote_geometry(seed, m, d, k):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(m, d))
    pts, src, nb, u = smote_points(P, 3 * m, k, rng)
    a, b = P[src], P[nb]
    seg = b - a
    L2 = (seg**2).sum(axis=1)
    t = np.where(L2 > 0, ((pts - a) * seg).sum(axis=1) / np.where(L2 > 0, L2, 1), 0)
    assert np.all((t >= -1e-12) & (t <= 1 + 1e-12))
    assert np.all(np.linalg.norm(pts - (a + t[:, None] * seg), axis=1) < 1e-9)
    dist = np.linalg.norm(P[:, None] - P[None], axis=2)
    np.fill_diagonal(dist, np.inf)
    kth = np.sort(dist, axis=1)[:, min(k, m - 1) - 1]
    assert np.all(dist[src, nb] <= kth[src])


def test_underbagging_bags():
    ds = with_rate(12, 80)
    pos = set(np.flatnonzero(ds.y == 1))
    for seed in range(20):
        m = fit_underbagging(ClassifierSpec("cart"), ds, 5, seed)
        for bag in m.bags:
            assert pos <= set(bag)
            neg = [i for i in bag if ds.y[i] == 0]
            assert len(neg) == len(set(neg)) == 12
    one = fit_underbagging(ClassifierSpec("1nn"), ds, 1, 0)
    assert len(one.members) == 1 and len(one.members[0].y) == 24


def test_ensemble_mean():
    e = EnsembleModel([ConstantModel(0.2, 1), ConstantModel(0.8, 1)], np.ones(2), [0, 1], 1)
    assert e.predict_scores(np.zeros((1, 1)))[0] == pytest.approx(0.5)


def test_rusboost_separable_and_weights():
    ds = make_synthetic("gaussians", 300, 2, 0.0, 0.1, 3)
    m = fit_rusboost(ds, 10, 0)
    assert np.array_equal(m.predict(ds.features), ds.y)
    # a perfect first learner ends boosting at once
    assert len(m.members) == 1 and m.trace[-1]["epsilon"] == 1e-10


def test_rusboost_invariants():
    for seed in range(5):
        ds = make_synthetic("clusters", 300, 3, 3.0, 0.08, seed)
        m = fit_rusboost(ds, 20, seed, tree_params={"max_depth": 2})
        for t in m.trace:
            assert t["weight_sum"] == pytest.approx(1.0, abs=1e-12)
            if t["kept"]:
                assert t["epsilon"] < 0.5 and t["alpha"] > 0
        assert len(m.members) == len(m.weights)


def test_dispatch():
    ds = make_synthetic("clusters", 150, 2, 1.0, 0.2, 0)
    cart = ClassifierSpec("cart")
    base = fit_solution(StrategySpec("baseline"), cart, ds, 1)
    direct = fit(cart, ds, np.ones(len(ds)), 1)
    assert base.tree.same_structure(direct.tree)
    bal = with_rate(20, 20, seed=4)
    cw = fit_solution(StrategySpec("weight"), cart, bal, 0)
    explicit = fit(cart, bal, np.where(bal.y == 1, 2.0, 1.0))
    assert cw.tree.same_structure(explicit.tree)
    assert fit(cart, bal, np.full(len(bal), 2.0)).tree.same_structure(fit(cart, bal).tree)
    sm = fit_solution(StrategySpec("smote"), ClassifierSpec("1nn"), ds, 0)
    assert len(sm.X) == 2 * ds.n_negative
    with pytest.raises(ValueError):
        fit_solution(StrategySpec("smote"), None, ds, 0)
