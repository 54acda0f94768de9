import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imbench.data import (BinaryDataset, DataError, Dataset, RateUnreachable, SplitPlan, binarize,
                          choose_positive, imbalance_levels, load_csv, make_synthetic,
                          rebalance_to_rate, split_holdout, stratified_kfold, write_csv)
from imbench.classifiers import ClassifierSpec, fit


def binary(n_pos, n_neg, d=2, seed=0):
    rng = np.random.default_rng(seed)
    return BinaryDataset(rng.normal(size=(n_pos + n_neg, d)), np.r_[np.ones(n_pos), np.zeros(n_neg)])


def test_load_small(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("x1,x2,class\n1,2,a\n3,4,b\n5,6,a\n")
    ds = load_csv(f, "class")
    assert ds.features.shape == (3, 2)
    assert list(ds.labels) == ["a", "b", "a"]


def test_load_matches_line_parse(tmp_path):
    rng = np.random.default_rng(0)
    f = tmp_path / "b.csv"
    with f.open("w") as fh:
        fh.write("u,y,v\n")
        for i in range(100):
            fh.write(f"{rng.normal()},{'pq'[i % 3 == 0]},{i}\n")
    ds = load_csv(f, "y")
    lines = f.read_text().splitlines()[1:]
    assert list(ds.labels) == [ln.split(",")[1] for ln in lines]
    assert ds.features[:, 1].tolist() == [float(ln.split(",")[2]) for ln in lines]


@pytest.mark.parametrize("body,needle", [
    ("x,class\n1,a\nNaN,b\n", ":3"),
    ("x,class\n1,a\nfoo,b\n", "'x'"),
    ("x,class\n", "no data"),
    ("", "empty"),
])
def test_load_errors(tmp_path, body, needle):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    with pytest.raises(DataError, match=needle):
        load_csv(f, "class")


def test_load_missing(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "nope.csv", "class")
    f = tmp_path / "c.csv"
    f.write_text("x,lab\n1,a\n")
    with pytest.raises(DataError, match="class"):
        load_csv(f, "class")


def test_choose_positive():
    assert choose_positive(["A"] * 30 + ["B"] * 70) == "A"
    assert choose_positive(["A"] * 60 + ["B"] * 30 + ["C"] * 10) == "C"
    assert choose_positive(["A"] * 96 + ["B"] * 2 + ["C"] * 2) == "A"


def test_binarize_then_rebalance_rate():
    ds = Dataset(np.zeros((100, 1)), ["A"] * 96 + ["B"] * 2 + ["C"] * 2)
    b = binarize(ds)
    assert b.positive_label == "A" and b.n_positive == 96
    with pytest.raises(RateUnreachable):
        rebalance_to_rate(b, 0.05, 0)
    ds = Dataset(np.arange(400.0)[:, None], ["A"] * 380 + ["B"] * 20)
    b = rebalance_to_rate(binarize(ds), 0.05, 0)
    assert b.imbalance_rate <= 0.5


def test_rebalance_examples():
    out = rebalance_to_rate(binary(200, 1000), 0.05, 0)
    assert (out.n_positive, out.n_negative) == (52, 1000)
    same = rebalance_to_rate(binary(50, 950), 0.05, 0)
    assert (same.n_positive, same.n_negative) == (50, 950)
    with pytest.raises(RateUnreachable):
        rebalance_to_rate(binary(11, 989), 0.001, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 200), st.integers(10, 400), st.sampled_from([0.5, 0.2, 0.1, 0.05, 0.03]))
def test_rebalance_properties(p, n, rate):
    ds = binary(p, n)
    try:
        out = rebalance_to_rate(ds, rate, 7)
    except RateUnreachable:
        return
    assert out.n_positive <= p and out.n_negative <= n
    assert out.imbalance_rate <= rate + 1e-12
    assert np.array_equal(out.features, ds.features[out.index])
    # the next positive (or negative removal) would overshoot
    if out.n_positive < p:
        assert (out.n_positive + 1) / (len(out) + 1) > rate
    if out.n_negative < n:
        assert out.n_positive / (len(out) - 1) > rate


def test_levels_are_nested():
    achieved, skipped = imbalance_levels(binary(200, 1000), [0.05, 0.03, 0.01, 0.001], 3)
    assert {r: a.n_positive for r, a in achieved.items()} == {0.05: 52, 0.03: 30, 0.01: 10}
    assert list(skipped) == [0.001]
    assert set(achieved[0.01].index) <= set(achieved[0.03].index) <= set(achieved[0.05].index)


def test_split_holdout():
    ds = binary(10, 90)
    plan = SplitPlan(0.2, 3, 3, seed=5)
    tr, te = split_holdout(ds, plan, 0)
    assert (te.n_positive, te.n_negative) == (2, 18)
    assert (tr.n_positive, tr.n_negative) == (8, 72)
    assert not set(tr.index) & set(te.index)
    again = split_holdout(ds, plan, 0)[1]
    assert np.array_equal(te.index, again.index)
    assert not np.array_equal(te.index, split_holdout(ds, plan, 1)[1].index)
    with pytest.raises(DataError):
        split_holdout(binary(4, 90), plan, 0)


def test_kfold_examples():
    folds = stratified_kfold(binary(9, 90), 3, 0)
    assert [(v.n_positive, v.n_negative) for _, v in folds] == [(3, 30)] * 3
    folds = stratified_kfold(binary(10, 20), 3, 0)
    assert [v.n_positive for _, v in folds] == [4, 3, 3]
    val = np.concatenate([v.index for _, v in folds])
    assert sorted(val) == list(range(30))
    for tr, v in folds:
        assert not set(tr.index) & set(v.index)
        assert len(tr) + len(v) == 30
    with pytest.raises(DataError):
        stratified_kfold(binary(2, 20), 3, 0)


def test_synthetic():
    ds = make_synthetic("gaussians", 1000, 3, 1.0, 0.05, 0)
    assert (ds.n_positive, ds.n_negative) == (50, 950)
    again = make_synthetic("gaussians", 1000, 3, 1.0, 0.05, 0)
    assert np.array_equal(ds.features, again.features) and np.array_equal(ds.y, again.y)
    for family in ("gaussians", "clusters"):
        sep = make_synthetic(family, 400, 2, 0.0, 0.1, 4)
        stump = fit(ClassifierSpec("cart", {"max_depth": 1 if family == "gaussians" else None}), sep)
        assert np.array_equal(stump.predict(sep.features), sep.y)
    with pytest.raises(DataError):
        make_synthetic("spirals", 10, 2, 0.0, 0.1, 0)


def test_write_read_roundtrip(tmp_path):
    ds = make_synthetic("clusters", 200, 3, 1.0, 0.1, 2)
    f = tmp_path / "s.csv"
    write_csv(ds, f)
    back = load_csv(f, "class", positive_label="positive")
    assert np.array_equal(back.features, ds.features) and np.array_equal(back.y, ds.y)
    with f.open() as fh:
        assert next(csv.reader(fh)) == ["x0", "x1", "x2", "class"]
