"""Imbalance strategies wrapped around the base classifiers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import CartModel, ClassifierSpec, ConstantModel, Model, fit, grow_tree
from .data import BinaryDataset, DataError
from .seeding import derive_seed, rng_for

STRATEGIES = ("baseline", "class_weight", "smote", "underbagging", "rusboost")
BAG_SIZES = (10, 20, 30, 40, 60)
STRATEGY_PARAMS = {"smote": ("k",), "underbagging": ("n",), "rusboost": ("nboost",)}
ALIASES = {"weight": "class_weight"}


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", dict(self.params))


def class_weight_vector(ds: BinaryDataset) -> np.ndarray:
    """Weight 1 for negatives and ``1 / imbalance_rate`` for positives."""
    rate = ds.imbalance_rate
    if rate <= 0:
        raise ValueError("class weights need at least one positive example")
    return np.where(ds.y == 1, 1.0 / rate, 1.0)


def smote_points(P, n_new, k, rng):
    """Interpolate ``n_new`` points between rows of ``P`` and their nearest rows.

    Returns ``(points, source, neighbor, u)``. Sources are taken round-robin
    over a random permutation of ``P``; each draws one of its ``k`` nearest
    other rows (Euclidean, lower index on distance ties) and a uniform ``u``.
    """
    m, d = P.shape
    if n_new <= 0:
        e = np.empty(0, dtype=np.int64)
        return np.empty((0, d)), e, e, np.empty(0)
    order = rng.permutation(m)
    source = order[np.arange(n_new) % m]
    if m == 1:
        return np.repeat(P, n_new, axis=0), source, source.copy(), np.zeros(n_new)
    k_eff = min(k, m - 1)
    d2 = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    knn = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
    neighbor = knn[source, rng.integers(0, k_eff, size=n_new)]
    u = rng.random(n_new)
    pts = P[source] + u[:, None] * (P[neighbor] - P[source])
    return pts, source, neighbor, u


def apply_smote(ds: BinaryDataset, k: int = 5, rng_seed=0) -> BinaryDataset:
    """Add synthetic positives until both classes have the same size.

    ``rng_seed`` may also be a generator-like object (``permutation``,
    ``integers``, ``random``), which tests use to pin draws.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    P = ds.features[ds.y == 1]
    if len(P) == 0:
        raise DataError("SMOTE needs at least one positive example")
    rng = rng_seed if hasattr(rng_seed, "permutation") else rng_for(rng_seed, "smote")
    n_new = ds.n_negative - ds.n_positive
    pts = smote_points(P, n_new, k, rng)[0]
    return BinaryDataset(
        np.vstack([ds.features, pts]),
        np.concatenate([ds.y, np.ones(len(pts), np.int8)]),
        ds.name, ds.positive_label,
        np.concatenate([ds.index, np.full(len(pts), -1, np.int64)]))


@dataclass(eq=False)
class EnsembleModel(Model):
    """Members combined by (weighted) mean score or weighted hard vote."""

    members: list
    weights: np.ndarray
    seeds: list
    n_features: int
    vote: bool = False
    bags: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    kind = "ensemble"

    def predict_scores(self, X):
        total = np.zeros(len(X))
        for m, a in zip(self.members, self.weights):
            s = m.predict_scores(X)
            total += a * ((s >= 0.5) if self.vote else s)
        return total / np.sum(self.weights)


def fit_underbagging(spec: ClassifierSpec, ds: BinaryDataset, n: int, rng_seed: int) -> EnsembleModel:
    """``n`` models, each on all positives plus as many random negatives."""
    if n < 1:
        raise ValueError("n must be at least 1")
    pos = np.flatnonzero(ds.y == 1)
    neg = np.flatnonzero(ds.y == 0)
    if len(pos) == 0:
        raise DataError("underbagging needs at least one positive example")
    if len(neg) < len(pos):
        raise DataError(f"{len(neg)} negatives cannot match {len(pos)} positives")
    members, seeds, bags = [], [], []
    for b in range(n):
        seed = derive_seed(rng_seed, "bag", b)
        chosen = rng_for(seed, "sample").choice(neg, size=len(pos), replace=False)
        rows = np.sort(np.concatenate([pos, chosen]))
        members.append(fit(spec, ds.take(rows), None, seed))
        seeds.append(seed)
        bags.append(rows)
    return EnsembleModel(members, np.ones(n), seeds, ds.n_features, bags=bags)


def fit_rusboost(ds: BinaryDataset, nboost: int, rng_seed: int, max_failures: int = 10,
                 tree_params: dict | None = None) -> Model:
    """AdaBoost.M1 over CART trees grown on per-round random undersamples.

    Each round keeps every positive and draws as many negatives without
    replacement, with probability proportional to their current weight; the
    tree is grown on the sample with the sample's weights. Error and weight
    updates use the full training set. A round with error >= 0.5 is redrawn,
    up to ``max_failures`` consecutive times; an error of 0 ends boosting.
    """
    pos = np.flatnonzero(ds.y == 1)
    neg = np.flatnonzero(ds.y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise DataError("rusboost needs both classes")
    tp = tree_params or {}
    X, y = ds.features, ds.y
    D = np.full(len(ds), 1.0 / len(ds))
    n_neg = min(len(pos), len(neg))
    members, alphas, seeds, trace = [], [], [], []
    attempt = 0
    failures = 0
    while len(members) < nboost and failures < max_failures:
        seed = derive_seed(rng_seed, "round", attempt)
        attempt += 1
        # floor keeps underflowed weights drawable
        p = np.maximum(D[neg], 1e-300)
        p = p / p.sum()
        chosen = rng_for(seed).choice(neg, size=n_neg, replace=False, p=p)
        rows = np.sort(np.concatenate([pos, chosen]))
        tree = grow_tree(X[rows], y[rows], D[rows], None, tp.get("max_depth"), tp.get("min_leaf", 1))
        wrong = (tree.predict(X) >= 0.5) != (y == 1)
        eps = float(D[wrong].sum())
        if eps >= 0.5:
            failures += 1
            trace.append({"epsilon": eps, "kept": False, "weight_sum": float(D.sum())})
            continue
        failures = 0
        stop = eps <= 0.0
        eps = max(eps, 1e-10)
        alpha = math.log((1.0 - eps) / eps)
        members.append(CartModel(tree, ds.n_features))
        alphas.append(alpha)
        seeds.append(seed)
        D = np.where(wrong, D, D * (eps / (1.0 - eps)))
        D = D / D.sum()
        trace.append({"epsilon": eps, "kept": True, "alpha": alpha, "weight_sum": float(D.sum())})
        if stop:
            break
    if not members:
        return ConstantModel(ds.imbalance_rate, ds.n_features)
    return EnsembleModel(members, np.array(alphas), seeds, ds.n_features, vote=True, trace=trace)


def fit_solution(strategy: StrategySpec, clf: ClassifierSpec | None, ds: BinaryDataset,
                 rng_seed: int) -> Model:
    """Train one (strategy, base classifier) combination on ``ds``."""
    kind = strategy.kind
    p = strategy.params
    if kind == "rusboost":
        return fit_rusboost(ds, int(p.get("nboost", 10)), rng_seed)
    if clf is None:
        raise ValueError(f"strategy {kind!r} needs a base classifier")
    if kind == "baseline":
        return fit(clf, ds, None, rng_seed)
    if kind == "class_weight":
        return fit(clf, ds, class_weight_vector(ds), rng_seed)
    if kind == "smote":
        return fit(clf, apply_smote(ds, int(p.get("k", 5)), rng_seed), None, rng_seed)
    if kind == "underbagging":
        return fit_underbagging(clf, ds, int(p.get("n", 10)), rng_seed)
    raise ValueError(f"unknown strategy {kind!r}")
