"""Dataset ingestion, binarization, controlled imbalancing and stratified splits."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import rng_for

POSITIVE = "positive"
NEGATIVE = "negative"
MIN_POSITIVES = 10
STANDARD_RATES = (0.05, 0.03, 0.01, 0.001)


class DataError(ValueError):
    """Raised for malformed input data or infeasible data operations."""


class RateUnreachable(DataError):
    """A rebalance target would leave fewer than the minimum positives."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty N x d matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite feature value at row {r}, column {c}")
        labels = np.asarray(self.labels).astype(str)
        if labels.shape != (X.shape[0],):
            raise DataError(f"{labels.shape[0]} labels for {X.shape[0]} rows")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class BinaryDataset:
    """Binary problem with ``y == 1`` marking the positive (minority) class.

    ``index`` holds the row ids of the source data; synthetic rows get -1.
    """

    features: np.ndarray
    y: np.ndarray
    name: str = "dataset"
    positive_label: str = POSITIVE
    index: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int8)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise DataError("features and labels disagree in length")
        if not np.isin(y, (0, 1)).all():
            raise DataError("binary labels must be 0/1")
        idx = np.arange(len(y)) if self.index is None else np.asarray(self.index, dtype=np.int64)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "index", idx)

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_positive(self) -> int:
        return int(self.y.sum())

    @property
    def n_negative(self) -> int:
        return len(self.y) - self.n_positive

    @property
    def imbalance_rate(self) -> float:
        return self.n_positive / len(self.y)

    def take(self, rows) -> BinaryDataset:
        rows = np.asarray(rows, dtype=np.int64)
        return BinaryDataset(self.features[rows], self.y[rows], self.name,
                             self.positive_label, self.index[rows])

    def labels(self) -> np.ndarray:
        return np.where(self.y == 1, POSITIVE, NEGATIVE)


def load_csv(path, label_column: str, positive_label: str | None = None, name: str | None = None):
    """Read a comma-separated file with a header row.

    Returns a :class:`Dataset`, or a :class:`BinaryDataset` directly when
    ``positive_label`` is given.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r} (have {header})")
        lab = header.index(label_column)
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            vals = []
            for col, cell in enumerate(rec):
                if col == lab:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: column {header[col]!r} is not numeric: {cell!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: column {header[col]!r} is not finite: {cell!r}")
                vals.append(v)
            rows.append(vals)
            labels.append(rec[lab].strip())
    if not rows:
        raise DataError(f"{path}: no data rows")
    if len(header) < 2:
        raise DataError(f"{path}: no feature columns")
    ds = Dataset(np.array(rows, dtype=np.float64), np.array(labels), name or path.stem)
    if positive_label is None:
        return ds
    if positive_label not in set(ds.labels):
        raise DataError(f"{path}: positive label {positive_label!r} not found in column {label_column!r}")
    return BinaryDataset(ds.features, ds.labels == positive_label, ds.name, positive_label)


def write_csv(ds: BinaryDataset, path, label_column: str = "class") -> None:
    path = Path(path)
    d = ds.n_features
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(d)] + [label_column])
        for row, lab in zip(ds.features, ds.labels()):
            w.writerow([repr(float(v)) for v in row] + [lab])


def choose_positive(labels) -> str:
    counts = Counter(labels)
    if len(counts) < 2:
        raise DataError("dataset has a single class")
    n = sum(counts.values())
    # sorted for a deterministic answer on frequency ties
    items = sorted(counts.items(), key=lambda kv: (kv[1], kv[0]))
    if len(counts) == 2:
        return items[0][0]
    above = [(c, lab) for lab, c in items if c / n > 0.05]
    if above:
        return min(above)[1]
    return min(items, key=lambda kv: (-kv[1], kv[0]))[0]


def binarize(ds: Dataset) -> BinaryDataset:
    """Collapse a labelled dataset to positive-vs-rest.

    Binary data: the rarer class is positive. Multiclass: the rarest class
    whose frequency exceeds 5%, or the most frequent class when none does
    (the caller is then expected to rebalance).
    """
    pos = choose_positive(ds.labels.tolist())
    return BinaryDataset(ds.features, ds.labels == pos, ds.name, pos)


def _max_positives(n_neg: int, rate: float) -> int:
    p = int(math.floor(rate * n_neg / (1.0 - rate))) if rate < 1 else n_neg
    while p > 0 and p / (p + n_neg) > rate:
        p -= 1
    while (p + 1) / (p + 1 + n_neg) <= rate:
        p += 1
    return p


def _min_negatives(n_pos: int, rate: float) -> int:
    m = int(math.ceil(n_pos * (1.0 - rate) / rate))
    while m > 0 and n_pos / (n_pos + m - 1) <= rate:
        m -= 1
    while n_pos / (n_pos + m) > rate:
        m += 1
    return m


def rebalance_to_rate(ds: BinaryDataset, target_rate: float, rng_seed: int,
                      min_positives: int = MIN_POSITIVES) -> BinaryDataset:
    """Remove random positives (or negatives) so the positive rate hits ``target_rate``.

    Keeps the largest positive count whose rate does not exceed the target.
    Retained rows stay in their original order.
    """
    if not 0.0 < target_rate < 1.0:
        raise DataError(f"target rate must lie in (0, 1), got {target_rate}")
    P, N = ds.n_positive, ds.n_negative
    pos = np.flatnonzero(ds.y == 1)
    neg = np.flatnonzero(ds.y == 0)
    rng = rng_for(rng_seed, "rebalance", repr(float(target_rate)))
    if P / (P + N) > target_rate:
        keep_p = _max_positives(N, target_rate)
        if keep_p < min_positives:
            raise RateUnreachable(
                f"{ds.name}: rate {target_rate:g} needs {keep_p} positives (< {min_positives})")
        pos = np.sort(rng.choice(pos, size=keep_p, replace=False))
    else:
        if P < min_positives:
            raise RateUnreachable(f"{ds.name}: only {P} positives (< {min_positives})")
        keep_n = _min_negatives(P, target_rate)
        if keep_n < N:
            neg = np.sort(rng.choice(neg, size=keep_n, replace=False))
    return ds.take(np.sort(np.concatenate([pos, neg])))


def imbalance_levels(ds: BinaryDataset, rates, rng_seed: int, min_positives: int = MIN_POSITIVES):
    """Nested rebalancing through ``rates`` in decreasing order.

    Returns ``(achieved, skipped)``: a rate -> dataset map, and a rate ->
    reason map for targets that could not be met.
    """
    achieved, skipped = {}, {}
    current = ds
    for rate in sorted(set(rates), reverse=True):
        try:
            current = rebalance_to_rate(current, rate, rng_seed, min_positives)
        except RateUnreachable as exc:
            skipped[rate] = str(exc)
            continue
        achieved[rate] = current
    return achieved, skipped


@dataclass(frozen=True)
class SplitPlan:
    test_fraction: float = 0.2
    repetitions: int = 3
    inner_folds: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError("test_fraction must lie in (0, 1)")
        if self.repetitions < 1 or self.inner_folds < 2:
            raise DataError("need repetitions >= 1 and inner_folds >= 2")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_holdout(ds: BinaryDataset, plan: SplitPlan, repetition: int):
    """Stratified train/test partition for one repetition, as index-preserving subsets."""
    if not 0 <= repetition < plan.repetitions:
        raise DataError(f"repetition {repetition} outside [0, {plan.repetitions})")
    rng = rng_for(plan.seed, "holdout", repetition)
    test = []
    for cls in (1, 0):
        members = np.flatnonzero(ds.y == cls)
        k = _round_half_up(len(members) * plan.test_fraction)
        if cls == 1 and (k < 2 or k >= len(members)):
            raise DataError(
                f"{ds.name}: {len(members)} positives cannot give >= 2 test and >= 1 train positives")
        test.append(rng.permutation(members)[:k])
    test = np.sort(np.concatenate(test))
    mask = np.ones(len(ds), dtype=bool)
    mask[test] = False
    return ds.take(np.flatnonzero(mask)), ds.take(test)


def stratified_kfold(ds: BinaryDataset, k: int, rng_seed: int):
    """``k`` (train, validation) pairs; remainders go to the lowest-numbered folds."""
    if k < 2:
        raise DataError("k must be at least 2")
    if ds.n_positive < k:
        raise DataError(f"{ds.name}: {ds.n_positive} positives cannot fill {k} folds")
    rng = rng_for(rng_seed, "kfold", k)
    fold_of = np.empty(len(ds), dtype=np.int64)
    for cls in (1, 0):
        members = rng.permutation(np.flatnonzero(ds.y == cls))
        sizes = np.full(k, len(members) // k)
        sizes[: len(members) % k] += 1
        fold_of[members] = np.repeat(np.arange(k), sizes)
    out = []
    for f in range(k):
        val = np.flatnonzero(fold_of == f)
        tr = np.flatnonzero(fold_of != f)
        out.append((ds.take(tr), ds.take(val)))
    return out


def _truncated_normal(rng, size, bound=3.0):
    z = rng.standard_normal(size)
    bad = np.abs(z) > bound
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > bound
    return z


def make_synthetic(family: str, n: int, dim: int, overlap: float, rate: float,
                   rng_seed: int, name: str | None = None) -> BinaryDataset:
    """Generate a two-class problem with ``round(n * rate)`` positives.

    Noise is standard normal truncated at 3 SD, and class means sit
    ``6 / (1 + overlap)`` SD apart, so ``overlap=0`` is exactly separable.

    ``gaussians``: one Gaussian per class, separated along the first axis.
    ``clusters``: negatives from three broad blobs, positives from three
    small blobs, each placed off a negative blob in a random direction.
    """
    if n <= 0 or dim <= 0:
        raise DataError("n and dim must be positive")
    if overlap < 0:
        raise DataError("overlap must be non-negative")
    if not 0.0 < rate <= 0.5:
        raise DataError("rate must lie in (0, 0.5]")
    n_pos = _round_half_up(n * rate)
    if n_pos < 1:
        raise DataError(f"n={n} at rate {rate} gives no positives")
    n_neg = n - n_pos
    rng = rng_for(rng_seed, "synthetic", family, n, dim, repr(float(overlap)), repr(float(rate)))
    sep = 6.0 / (1.0 + overlap)
    if family == "gaussians":
        neg = _truncated_normal(rng, (n_neg, dim))
        pos = _truncated_normal(rng, (n_pos, dim))
        pos[:, 0] += sep
    elif family == "clusters":
        centers = rng.normal(0.0, 4.0, size=(3, dim))
        neg = _truncated_normal(rng, (n_neg, dim)) + centers[rng.integers(0, 3, n_neg)]
        dirs = rng.standard_normal((3, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        # small blobs need less offset than unit-variance ones to separate
        pcenters = centers[rng.permutation(3)] + dirs * (sep / 2.0 + 1.5)
        pos = 0.5 * _truncated_normal(rng, (n_pos, dim)) + pcenters[rng.integers(0, 3, n_pos)]
    else:
        raise DataError(f"unknown synthetic family {family!r}")
    X = np.vstack([neg, pos])
    y = np.concatenate([np.zeros(n_neg, np.int8), np.ones(n_pos, np.int8)])
    perm = rng.permutation(n)
    return BinaryDataset(X[perm], y[perm], name or f"{family}-{rng_seed}", POSITIVE)
