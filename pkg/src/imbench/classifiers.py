"""Base classifiers with a uniform ``fit`` / ``predict_scores`` interface.

Every fitted model exposes ``predict_scores(X)`` returning one score in
[0, 1] per row; the predicted label is ``score >= 0.5``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _tree
from .data import BinaryDataset
from .seeding import derive_seed, rng_for

KINDS = ("cart", "random_forest", "gradient_boosting", "one_nn")
ALIASES = {
    "cart": "cart",
    "rf": "random_forest",
    "random_forest": "random_forest",
    "xgb": "gradient_boosting",
    "gb": "gradient_boosting",
    "gradient_boosting": "gradient_boosting",
    "1nn": "one_nn",
    "one_nn": "one_nn",
}
SHORT_NAMES = {"cart": "cart", "random_forest": "rf", "gradient_boosting": "xgb", "one_nn": "1nn"}

# Not trained here; kept so configs can carry the full classifier list.
SVM_RBF_RANGES = {"C": (2.0**-5, 2.0**15), "gamma": (2.0**-15, 2.0**3)}


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = ALIASES.get(self.kind)
        if kind is None:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {sorted(ALIASES)}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def short_name(self) -> str:
        return SHORT_NAMES[self.kind]

    def with_params(self, **params) -> ClassifierSpec:
        return ClassifierSpec(self.kind, {**self.params, **params})


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X):
        return _tree.predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X)

    def same_structure(self, other: Tree) -> bool:
        return all(np.array_equal(getattr(self, a), getattr(other, a))
                   for a in ("feature", "threshold", "left", "right", "value"))

    def to_dict(self):
        return {a: getattr(self, a).tolist() for a in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["feature"], np.int64), np.array(d["threshold"], np.float64),
                   np.array(d["left"], np.int64), np.array(d["right"], np.int64),
                   np.array(d["value"], np.float64))


class Model:
    kind = "model"
    n_features: int

    def predict_scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.predict_scores(X) >= 0.5).astype(np.int8)


@dataclass(eq=False)
class ConstantModel(Model):
    score: float
    n_features: int
    kind = "constant"

    def predict_scores(self, X):
        return np.full(len(X), self.score, dtype=np.float64)


@dataclass(eq=False)
class CartModel(Model):
    tree: Tree
    n_features: int
    kind = "cart"

    def predict_scores(self, X):
        return self.tree.predict(X)


@dataclass(eq=False)
class ForestModel(Model):
    trees: list
    n_features: int
    kind = "random_forest"

    def predict_scores(self, X):
        votes = np.zeros(len(X))
        for t in self.trees:
            votes += t.predict(X) >= 0.5
        return votes / len(self.trees)


@dataclass(eq=False)
class BoostingModel(Model):
    trees: list
    eta: float
    n_features: int
    kind = "gradient_boosting"

    def margin(self, X):
        F = np.zeros(len(X))
        for t in self.trees:
            F += self.eta * t.predict(X)
        return F

    def predict_scores(self, X):
        return _sigmoid(self.margin(X))


@dataclass(eq=False)
class NearestNeighborModel(Model):
    X: np.ndarray
    y: np.ndarray
    kind = "one_nn"

    @property
    def n_features(self):
        return self.X.shape[1]

    def predict_scores(self, X):
        return _tree.nearest_labels(self.X, self.y.astype(np.int64), X)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def grow_tree(X, y, w, mtry=None, max_depth=None, min_leaf=1, seed=0) -> Tree:
    d = X.shape[1]
    return Tree(*_tree.build_gini_tree(
        np.ascontiguousarray(X, dtype=np.float64), np.asarray(y, np.int64),
        np.asarray(w, np.float64), d if mtry is None else int(mtry),
        -1 if max_depth is None else int(max_depth), int(min_leaf), int(seed % 2**32)))


def _check_weights(weights, n):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise FitError(f"weight vector has length {len(w)}, expected {n}")
    if (w < 0).any() or not np.isfinite(w).all() or w.sum() <= 0:
        raise FitError("weights must be finite, non-negative and not all zero")
    return w


def fit(spec: ClassifierSpec, train: BinaryDataset, weights=None, rng_seed: int = 0) -> Model:
    """Train ``spec`` on ``train`` with optional per-example ``weights``.

    Parameters by kind:

    - cart: ``max_depth`` (None), ``min_leaf`` (1)
    - random_forest: ``ntree`` (500), ``mtry`` (floor(sqrt(d))), ``bootstrap`` (True)
    - gradient_boosting: ``nrounds`` (100), ``max_depth`` (6), ``eta`` (0.3),
      ``lambda`` (1.0), ``min_child_weight`` (1.0)
    - one_nn: none; weights are accepted and ignored
    """
    n = len(train)
    if n == 0:
        raise FitError("empty training set")
    X, y = train.features, train.y
    w = _check_weights(weights, n)
    d = X.shape[1]
    p = spec.params
    single_class = train.n_positive in (0, n)

    if spec.kind == "cart":
        if single_class:
            return ConstantModel(float(y[0]), d)
        tree = grow_tree(X, y, w, None, p.get("max_depth"), p.get("min_leaf", 1))
        return CartModel(tree, d)

    if single_class:
        raise FitError(f"{spec.kind}: training set holds a single class")

    if spec.kind == "random_forest":
        ntree = int(p.get("ntree", 500))
        mtry = int(p.get("mtry", max(1, int(np.sqrt(d)))))
        if ntree < 1 or not 1 <= mtry <= d:
            raise FitError(f"random_forest needs ntree >= 1 and 1 <= mtry <= {d}")
        bootstrap = bool(p.get("bootstrap", True))
        trees = []
        for t in range(ntree):
            tseed = derive_seed(rng_seed, "tree", t)
            if bootstrap:
                counts = np.bincount(rng_for(tseed).integers(0, n, n), minlength=n)
                rows = np.flatnonzero(counts)
                tw = counts[rows] * w[rows]
                trees.append(grow_tree(X[rows], y[rows], tw, mtry, None, 1, tseed))
            else:
                trees.append(grow_tree(X, y, w, mtry, None, 1, tseed))
        return ForestModel(trees, d)

    if spec.kind == "gradient_boosting":
        return _fit_boosting(X, y, w, p)

    if spec.kind == "one_nn":
        return NearestNeighborModel(X.copy(), y.copy())

    raise FitError(f"unsupported kind {spec.kind}")


def _fit_boosting(X, y, w, p):
    nrounds = int(p.get("nrounds", 100))
    depth = int(p.get("max_depth", 6))
    eta = float(p.get("eta", 0.3))
    lam = float(p.get("lambda", 1.0))
    mcw = float(p.get("min_child_weight", 1.0))
    if nrounds < 1 or depth < 1 or eta <= 0:
        raise FitError("gradient_boosting needs nrounds >= 1, max_depth >= 1, eta > 0")
    F = np.zeros(len(y))
    yf = y.astype(np.float64)
    order = _tree.presort(X)
    trees = []
    for _ in range(nrounds):
        prob = _sigmoid(F)
        g = w * (prob - yf)
        h = w * prob * (1.0 - prob)
        tree = Tree(*_tree.build_newton_tree(X, order, g, h, depth, lam, mcw))
        F += eta * tree.predict(X)
        trees.append(tree)
    return BoostingModel(trees, eta, X.shape[1])


def logistic_loss(model: BoostingModel, ds: BinaryDataset, rounds=None) -> float:
    """Mean logistic deviance of the first ``rounds`` trees on ``ds``."""
    F = np.zeros(len(ds))
    for t in model.trees[:rounds]:
        F += model.eta * t.predict(ds.features)
    return float(np.mean(np.logaddexp(0.0, F) - ds.y * F))


def predict_scores(model: Model, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} feature columns, got shape {X.shape}")
    return model.predict_scores(X)


# Serialization: one JSON object {"format", "kind", ...kind-specific fields}.
FORMAT = "imbench-model/1"


def model_to_dict(model: Model) -> dict:
    base = {"format": FORMAT, "kind": model.kind, "n_features": model.n_features}
    if isinstance(model, ConstantModel):
        return {**base, "score": model.score}
    if isinstance(model, CartModel):
        return {**base, "tree": model.tree.to_dict()}
    if isinstance(model, ForestModel):
        return {**base, "trees": [t.to_dict() for t in model.trees]}
    if isinstance(model, BoostingModel):
        return {**base, "eta": model.eta, "trees": [t.to_dict() for t in model.trees]}
    if isinstance(model, NearestNeighborModel):
        return {**base, "X": model.X.tolist(), "y": model.y.tolist()}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d: dict) -> Model:
    if d.get("format") != FORMAT:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    kind, nf = d["kind"], d["n_features"]
    if kind == "constant":
        return ConstantModel(d["score"], nf)
    if kind == "cart":
        return CartModel(Tree.from_dict(d["tree"]), nf)
    if kind == "random_forest":
        return ForestModel([Tree.from_dict(t) for t in d["trees"]], nf)
    if kind == "gradient_boosting":
        return BoostingModel([Tree.from_dict(t) for t in d["trees"]], d["eta"], nf)
    if kind == "one_nn":
        return NearestNeighborModel(np.array(d["X"], np.float64), np.array(d["y"], np.int8))
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model: Model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> Model:
    return model_from_dict(json.loads(Path(path).read_text()))
