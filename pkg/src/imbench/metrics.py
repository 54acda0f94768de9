"""Quality metrics for binary classifiers.

Threshold metrics are computed from a :class:`ConfusionMatrix`; AUC works
on raw scores. Undefined ratios (zero denominators) evaluate to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import rankdata


class MetricKind(str, Enum):
    ACC = "acc"
    AUC = "auc"
    F1 = "f1"
    GMEAN = "gmean"
    MCC = "mcc"
    BAC = "bac"
    PRECISION = "precision"
    RECALL = "recall"
    SPECIFICITY = "specificity"


# the six metrics compared by the experiment protocol
QUALITY_METRICS = ("auc", "acc", "f1", "gmean", "mcc", "bac")
METRIC_RANGES = {k.value: ((-1.0, 1.0) if k is MetricKind.MCC else (0.0, 1.0)) for k in MetricKind}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")
        if self.tp + self.fp + self.tn + self.fn < 1:
            raise ValueError("empty confusion matrix")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ScoredPredictions:
    scores: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        t = np.asarray(self.truth).astype(np.int8)
        if s.ndim != 1 or s.shape != t.shape or len(s) == 0:
            raise ValueError("scores and truth must be equal-length, non-empty vectors")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "truth", t)


def confusion(truth, predicted) -> ConfusionMatrix:
    t = np.asarray(truth).astype(bool)
    p = np.asarray(predicted).astype(bool)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    tn = int(np.sum(~t & ~p))
    fn = int(np.sum(t & ~p))
    return ConfusionMatrix(tp, fp, tn, fn)


def _ratio(a, b):
    return a / b if b else 0.0


def score_metric(kind, cm: ConfusionMatrix) -> float:
    kind = MetricKind(kind)
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    recall = _ratio(tp, tp + fn)
    specificity = _ratio(tn, tn + fp)
    if kind is MetricKind.ACC:
        return (tp + tn) / cm.total
    if kind is MetricKind.PRECISION:
        return _ratio(tp, tp + fp)
    if kind is MetricKind.RECALL:
        return recall
    if kind is MetricKind.SPECIFICITY:
        return specificity
    if kind is MetricKind.F1:
        return _ratio(2 * tp, 2 * tp + fp + fn)
    if kind is MetricKind.BAC:
        return (recall + specificity) / 2
    if kind is MetricKind.GMEAN:
        return math.sqrt(recall * specificity)
    if kind is MetricKind.MCC:
        den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
        if den == 0:
            return 0.0
        return (tp * tn - fp * fn) / math.sqrt(den)
    raise ValueError("auc needs scores, not a confusion matrix")


def auc(sp: ScoredPredictions, tie_policy: str = "zero") -> float:
    """Fraction of (positive, negative) pairs where the positive scores higher.

    ``tie_policy="zero"`` gives tied pairs no credit, ``"half"`` gives 1/2.
    """
    if tie_policy not in ("zero", "half"):
        raise ValueError(f"tie_policy must be 'zero' or 'half', got {tie_policy!r}")
    pos = sp.scores[sp.truth == 1]
    neg = np.sort(sp.scores[sp.truth == 0])
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("auc needs at least one positive and one negative example")
    below = np.searchsorted(neg, pos, side="left")
    wins = int(below.sum())
    if tie_policy == "half":
        ties = int((np.searchsorted(neg, pos, side="right") - below).sum())
        return (wins + 0.5 * ties) / (len(pos) * len(neg))
    return wins / (len(pos) * len(neg))


def auc_rank(sp: ScoredPredictions) -> float:
    """Rank-sum (Mann-Whitney) form of AUC; equals ``auc(sp, "half")``."""
    n_pos = int(sp.truth.sum())
    n_neg = len(sp.truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs at least one positive and one negative example")
    ranks = rankdata(sp.scores)
    u = ranks[sp.truth == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def evaluate(kind, sp: ScoredPredictions, threshold: float = 0.5, tie_policy: str = "zero") -> float:
    kind = MetricKind(kind)
    if kind is MetricKind.AUC:
        return auc(sp, tie_policy)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return score_metric(kind, confusion(sp.truth, sp.scores >= threshold))
