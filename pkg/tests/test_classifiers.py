import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from imbench.classifiers import (BoostingModel, ClassifierSpec, ConstantModel, FitError, fit,
                                 grow_tree, load_model, logistic_loss, predict_scores, save_model)
from imbench.data import BinaryDataset, make_synthetic


def small(seed, n=30, d=2, levels=5):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, levels, size=(n, d)).astype(float)
    y = rng.integers(0, 2, n)
    y[:2] = (0, 1)
    return X, y


def test_separable_1d():
    X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0]])
    ds = BinaryDataset(X, [0, 0, 0, 1, 1])
    m = fit(ClassifierSpec("cart", {"max_depth": 1}), ds)
    assert np.array_equal(m.predict(X), ds.y)
    assert m.tree.threshold[0] == 0.0


def test_split_tie_breaks_lowest_feature():
    # both columns separate perfectly; the split must use column 0
    X = np.array([[0.0, 0.0], [1.0, 1.0]] * 3)
    t = grow_tree(X, np.array([0, 1] * 3), np.ones(6))
    assert t.feature[0] == 0 and t.threshold[0] == 0.5


def test_duplication_example():
    X, y = small(3)
    w = np.where(y == 1, 3.0, 1.0)
    rows = np.concatenate([np.arange(len(y))] + [np.flatnonzero(y == 1)] * 2)
    rows.sort(kind="stable")
    assert grow_tree(X, y, w).same_structure(grow_tree(X[rows], y[rows], np.ones(len(rows))))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3), st.sampled_from([2, 3, 5, 10]))
def test_duplication_property(seed, d, k):
    X, y = small(seed, n=int(np.random.default_rng(seed).integers(4, 41)), d=d)
    w = np.where(y == 1, float(k), 1.0)
    rows = np.sort(np.concatenate([np.arange(len(y))] + [np.flatnonzero(y == 1)] * (k - 1)))
    assert grow_tree(X, y, w).same_structure(grow_tree(X[rows], y[rows], np.ones(len(rows))))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100))
def test_weight_scale_invariance(seed, c):
    X, y = small(seed, d=3)
    w = np.random.default_rng(seed).random(len(y)) + 0.1
    a, b = grow_tree(X, y, w), grow_tree(X, y, w * c)
    assert np.array_equal(a.feature, b.feature) and np.array_equal(a.threshold, b.threshold)
    assert np.allclose(a.value, b.value, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_feature_permutation_invariance(seed):
    # continuous features: equal-gain ties across columns are measure-zero
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 3))
    y = rng.integers(0, 2, 25)
    w = rng.random(25) + 0.1
    perm = rng.permutation(3)
    a = grow_tree(X, y, w)
    b = grow_tree(X[:, perm], y, w)
    assert np.array_equal(a.predict(X), b.predict(X[:, perm]))
    # equal-criterion splits may pick another column, but the rows end up grouped the same way
    la, lb = leaf_ids(a, X), leaf_ids(b, X[:, perm])
    assert len(set(zip(la, lb))) == len(set(la)) == len(set(lb))


def leaf_ids(tree, X):
    out = []
    for x in X:
        n = 0
        while tree.feature[n] >= 0:
            n = tree.left[n] if x[tree.feature[n]] <= tree.threshold[n] else tree.right[n]
        out.append(n)
    return out


def test_forest_degenerates_to_cart():
    ds = make_synthetic("clusters", 200, 3, 1.5, 0.2, 1)
    rf = fit(ClassifierSpec("rf", {"ntree": 1, "mtry": 3, "bootstrap": False}), ds, rng_seed=9)
    cart = fit(ClassifierSpec("cart"), ds, rng_seed=9)
    probe = make_synthetic("clusters", 300, 3, 1.5, 0.2, 2).features
    assert np.array_equal(rf.predict(probe), cart.predict(probe))


def test_forest_seeded():
    ds = make_synthetic("gaussians", 200, 4, 1.0, 0.2, 1)
    spec = ClassifierSpec("random_forest", {"ntree": 20})
    a, b = fit(spec, ds, rng_seed=3), fit(spec, ds, rng_seed=3)
    assert np.array_equal(a.predict_scores(ds.features), b.predict_scores(ds.features))
    c = fit(spec, ds, rng_seed=4)
    assert not all(x.same_structure(y) for x, y in zip(a.trees, c.trees))


def test_one_nn_identity():
    ds = make_synthetic("gaussians", 100, 2, 1.0, 0.2, 0)
    m = fit(ClassifierSpec("1nn"), ds)
    assert np.array_equal(m.predict_scores(ds.features), ds.y.astype(float))


def test_single_class():
    ds = BinaryDataset(np.zeros((4, 2)), [1, 1, 1, 1])
    m = fit(ClassifierSpec("cart"), ds)
    assert isinstance(m, ConstantModel) and np.all(m.predict_scores(np.zeros((3, 2))) == 1.0)
    with pytest.raises(FitError):
        fit(ClassifierSpec("xgb"), ds)


def test_boosting_separable():
    ds = make_synthetic("gaussians", 200, 2, 0.0, 0.1, 5)
    m = fit(ClassifierSpec("xgb", {"nrounds": 20}), ds)
    assert np.array_equal(m.predict(ds.features), ds.y)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6), st.floats(0.005, 0.5))
def test_boosting_loss_non_increasing(seed, depth, eta):
    ds = make_synthetic("clusters", 120, 3, 2.0, 0.15, seed)
    m = fit(ClassifierSpec("xgb", {"nrounds": 25, "max_depth": depth, "eta": eta}), ds)
    losses = [logistic_loss(m, ds, r) for r in range(26)]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_dimension_check_and_roundtrip(tmp_path):
    ds = make_synthetic("gaussians", 80, 3, 1.0, 0.2, 0)
    for spec in ("cart", "rf", "xgb", "1nn"):
        m = fit(ClassifierSpec(spec, {"ntree": 5, "nrounds": 5} if spec in ("rf", "xgb") else {}), ds)
        with pytest.raises(ValueError):
            predict_scores(m, np.zeros((2, 4)))
        save_model(m, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        assert np.array_equal(predict_scores(back, ds.features), predict_scores(m, ds.features))


def test_weight_validation():
    ds = make_synthetic("gaussians", 40, 2, 1.0, 0.2, 0)
    for bad in (np.ones(3), -np.ones(40), np.full(40, np.nan)):
        with pytest.raises((FitError, ValueError)):
            fit(ClassifierSpec("cart"), ds, bad)
    with pytest.raises(ValueError):
        ClassifierSpec("svm")
