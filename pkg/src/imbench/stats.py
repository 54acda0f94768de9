"""Rank-based comparison of several algorithms over many datasets.

Friedman test on within-row ranks, pairwise post-hoc z tests with
Bergmann-Hommel or Holm adjustment, Wilcoxon signed-rank for two
algorithms, and compact letter displays of the significance pattern.
"""

from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2, norm, rankdata

MAX_BERGMANN_HOMMEL = 5
WILCOXON_EXACT_MAX = 25


class StatsError(ValueError):
    pass


@dataclass
class PerformanceMatrix:
    values: np.ndarray
    columns: list
    rows: list = field(default_factory=list)
    higher_is_better: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise StatsError("performance matrix must be 2-D")
        n, k = self.values.shape
        if n < 2 or k < 2:
            raise StatsError(f"need at least 2 rows and 2 columns, got {n} x {k}")
        if np.isnan(self.values).any():
            raise StatsError("performance matrix has missing entries")
        if len(self.columns) != k:
            raise StatsError("column names do not match the matrix")
        if not self.rows:
            self.rows = list(range(n))

    def ranks(self) -> np.ndarray:
        """Within-row ranks, 1 = best, ties averaged."""
        v = -self.values if self.higher_is_better else self.values
        return rankdata(v, axis=1)


def friedman(pm: PerformanceMatrix):
    """Return ``(statistic, p_value, mean_ranks)``."""
    n, k = pm.values.shape
    R = pm.ranks().sum(axis=0)
    stat = 12.0 / (n * k * (k + 1)) * float(np.sum(R**2)) - 3.0 * n * (k + 1)
    stat = max(stat, 0.0)
    p = float(chi2.sf(stat, k - 1))
    return stat, p, R / n


def holm(p_values) -> np.ndarray:
    """Holm step-down adjusted p-values, in the input order."""
    p = np.asarray(p_values, dtype=np.float64)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    running = 0.0
    for pos, i in enumerate(order):
        running = max(running, min(1.0, (m - pos) * p[i]))
        adj[i] = running
    return adj


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def exhaustive_sets(k: int):
    """Every non-empty set of pairwise hypotheses that can hold simultaneously.

    A family of "column i equals column j" hypotheses can all be true only if
    it is the set of within-block pairs of some partition of the columns.
    Hypotheses are indexed by position in ``itertools.combinations(range(k), 2)``.
    """
    pairs = {p: i for i, p in enumerate(itertools.combinations(range(k), 2))}
    out = set()
    for part in _set_partitions(list(range(k))):
        s = frozenset(pairs[tuple(sorted(p))] for block in part
                      for p in itertools.combinations(block, 2))
        if s:
            out.add(s)
    return sorted(out, key=lambda s: (len(s), sorted(s)))


def bergmann_hommel(p_values, k: int) -> np.ndarray:
    """Adjusted p-values: max over exhaustive sets I containing i of |I| * min p(I)."""
    p = np.asarray(p_values, dtype=np.float64)
    adj = np.zeros(len(p))
    for s in exhaustive_sets(k):
        idx = list(s)
        v = len(idx) * p[idx].min()
        for i in idx:
            adj[i] = max(adj[i], v)
    return np.minimum(adj, 1.0)


@dataclass
class Posthoc:
    method: str
    z: np.ndarray
    raw: np.ndarray
    adjusted: np.ndarray
    note: str = ""


def pairwise_posthoc(pm: PerformanceMatrix, method: str = "bergmann_hommel") -> Posthoc:
    """Pairwise z tests on mean ranks; square matrices of z, raw and adjusted p."""
    if method not in ("bergmann_hommel", "holm"):
        raise StatsError(f"unknown adjustment {method!r}")
    n, k = pm.values.shape
    mean_ranks = pm.ranks().mean(axis=0)
    se = math.sqrt(k * (k + 1) / (6.0 * n))
    pairs = list(itertools.combinations(range(k), 2))
    z = np.array([(mean_ranks[i] - mean_ranks[j]) / se for i, j in pairs])
    raw = 2.0 * norm.sf(np.abs(z))
    note = ""
    if method == "bergmann_hommel" and k > MAX_BERGMANN_HOMMEL:
        method = "holm"
        note = f"bergmann_hommel limited to {MAX_BERGMANN_HOMMEL} columns; used holm"
    adj = bergmann_hommel(raw, k) if method == "bergmann_hommel" else holm(raw)

    def square(v, diag):
        M = np.full((k, k), diag, dtype=np.float64)
        for (i, j), x in zip(pairs, v):
            M[i, j] = M[j, i] = x
        return M

    Z = square(z, 0.0)
    for i, j in pairs:
        Z[j, i] = -Z[i, j]
    return Posthoc(method, Z, square(raw, 1.0), square(adj, 1.0), note)


def _signed_ranks(a, b):
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if d.shape != np.shape(b) or d.ndim != 1:
        raise StatsError("paired samples must be equal-length vectors")
    d = d[d != 0]
    if len(d) == 0:
        raise StatsError("all paired differences are zero")
    return d, rankdata(np.abs(d))


def wilcoxon_null_counts(doubled_ranks) -> np.ndarray:
    """Number of sign patterns giving each value of 2 * W+ (index = 2 * W+)."""
    r = np.asarray(doubled_ranks, dtype=np.int64)
    counts = np.zeros(int(r.sum()) + 1, dtype=object)
    counts[0] = 1
    for x in r:
        shifted = np.zeros_like(counts)
        shifted[x:] = counts[: len(counts) - x]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a, b, exact_max: int = WILCOXON_EXACT_MAX):
    """Two-sided Wilcoxon signed-rank test; returns ``(min(W+, W-), p_value)``.

    Zero differences are dropped and tied magnitudes get average ranks.
    With ``n <= exact_max`` the p-value is exact (conditional on the tie
    pattern), otherwise a tie-corrected normal approximation with
    continuity correction.
    """
    d, r = _signed_ranks(a, b)
    n = len(d)
    if n < 5:
        raise StatsError(f"need at least 5 non-zero differences, got {n}")
    w_plus = float(r[d > 0].sum())
    w_minus = float(r[d < 0].sum())
    stat = min(w_plus, w_minus)
    if n <= exact_max:
        doubled = np.rint(2 * r).astype(np.int64)
        counts = wilcoxon_null_counts(doubled)
        total = int(doubled.sum())
        obs = int(round(2 * w_plus))
        dev = abs(2 * obs - total)
        vals = np.arange(len(counts))
        extreme = int(counts[np.abs(2 * vals - total) >= dev].sum())
        return stat, min(1.0, extreme / 2**n)
    mean = n * (n + 1) / 4.0
    _, t = np.unique(r, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(t**3 - t)) / 48.0
    z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return stat, float(min(1.0, 2.0 * norm.sf(max(z, 0.0))))


def _letter(i: int) -> str:
    alphabet = string.ascii_lowercase + string.ascii_uppercase
    if i < len(alphabet):
        return alphabet[i]
    return alphabet[i % len(alphabet)] + str(i // len(alphabet))


def letter_display(mean_ranks, sig) -> list:
    """Insert-and-absorb letter assignment.

    Two columns share a letter exactly when ``sig`` marks their difference
    as not significant. Letters are handed out in order of the best-ranked
    member of each group, so the best column always carries ``a``.
    """
    sig = np.asarray(sig, dtype=bool)
    k = len(mean_ranks)
    if sig.shape != (k, k):
        raise StatsError("significance matrix shape does not match the ranks")
    groups = [frozenset(range(k))]
    for i, j in itertools.combinations(range(k), 2):
        if not sig[i, j]:
            continue
        nxt = []
        for g in groups:
            if i in g and j in g:
                nxt.extend([g - {i}, g - {j}])
            else:
                nxt.append(g)
        uniq = list(dict.fromkeys(nxt))
        groups = [g for g in uniq if not any(g < h for h in uniq)]
    order = sorted(range(k), key=lambda c: (mean_ranks[c], c))
    pos = {c: p for p, c in enumerate(order)}
    groups.sort(key=lambda g: sorted(pos[c] for c in g))
    letters = [""] * k
    for li, g in enumerate(groups):
        for c in g:
            letters[c] += _letter(li)
    return letters


def shares_iff_not_significant(letters, sig) -> bool:
    k = len(letters)
    for i, j in itertools.combinations(range(k), 2):
        share = bool(set(letters[i]) & set(letters[j]))
        if share == bool(sig[i][j]):
            return False
    return True


# -- comparisons over result tables ----------------------------------------

@dataclass
class Question:
    """What to compare.

    ``group``: ``"strategies"`` (columns are strategies, rows are
    dataset x rate x classifier), ``"combinations"`` (columns are solution
    ids, rows dataset x rate) or ``"pair"`` (the two solution ids in ``pair``).
    """

    metric: str
    group: str = "strategies"
    pair: tuple | None = None
    rates: list | None = None
    datasets: list | None = None
    classifiers: list | None = None
    strategies: list | None = None
    alpha: float = 0.05
    method: str = "bergmann_hommel"


@dataclass
class RankSummary:
    metric: str
    columns: list
    mean_ranks: np.ndarray
    n_rows: int
    method: str
    statistic: float
    p_value: float
    adjusted: np.ndarray | None
    letters: list
    note: str = ""

    def ordered(self):
        """``(column, mean rank, letters)`` sorted best first."""
        idx = sorted(range(len(self.columns)), key=lambda i: (self.mean_ranks[i], self.columns[i]))
        return [(self.columns[i], float(self.mean_ranks[i]), self.letters[i]) for i in idx]


def performance_matrix(rt, q: Question) -> PerformanceMatrix:
    agg = rt.aggregate()
    info = rt.solution_info()

    def keep(dataset, rate, sol):
        strategy, clf = info[sol]
        if q.rates is not None and not any(math.isclose(rate, r) for r in q.rates):
            return False
        if q.datasets is not None and dataset not in q.datasets:
            return False
        if q.strategies is not None and strategy not in q.strategies:
            return False
        if q.classifiers is not None and clf and clf not in q.classifiers:
            return False
        return True

    cells = {}
    classifiers = set()
    for (dataset, rate, sol, metric), v in agg.items():
        if metric != q.metric or not keep(dataset, rate, sol):
            continue
        strategy, clf = info[sol]
        if q.group == "strategies":
            if clf:
                classifiers.add(clf)
            cells.setdefault((dataset, rate, clf), {})[strategy] = v
        elif q.group == "combinations":
            cells.setdefault((dataset, rate), {})[sol] = v
        elif q.group == "pair":
            if q.pair is None or len(q.pair) != 2:
                raise StatsError("a pair question needs exactly two solution ids")
            if sol in q.pair:
                cells.setdefault((dataset, rate), {})[sol] = v
        else:
            raise StatsError(f"unknown grouping {q.group!r}")

    if q.group == "strategies":
        # classifier-free solutions (rusboost) are compared on every classifier's rows
        merged = {}
        for (dataset, rate, clf), row in cells.items():
            if clf:
                merged.setdefault((dataset, rate, clf), {}).update(row)
        for (dataset, rate, clf), row in cells.items():
            if not clf:
                targets = [c for c in sorted(classifiers)] or [""]
                for c in targets:
                    merged.setdefault((dataset, rate, c), {}).update(row)
        cells = merged

    if q.group == "pair":
        columns = list(q.pair)
    else:
        columns = sorted({c for row in cells.values() for c in row})
    rows = sorted(k for k, row in cells.items() if all(c in row for c in columns))
    if not rows or len(columns) < 2:
        raise StatsError(f"empty selection for metric {q.metric!r}")
    values = np.array([[cells[r][c] for c in columns] for r in rows])
    return PerformanceMatrix(values, columns, rows)


def compare(rt, q: Question) -> RankSummary:
    pm = performance_matrix(rt, q)
    k = len(pm.columns)
    mean_ranks = pm.ranks().mean(axis=0)
    if k == 2:
        note = ""
        try:
            stat, p = wilcoxon_signed_rank(pm.values[:, 0], pm.values[:, 1])
        except StatsError as exc:
            stat, p, note = float("nan"), float("nan"), str(exc)
        sig = np.zeros((2, 2), dtype=bool)
        sig[0, 1] = sig[1, 0] = bool(p < q.alpha)
        adj = np.array([[1.0, p], [p, 1.0]])
        return RankSummary(q.metric, pm.columns, mean_ranks, len(pm.rows), "wilcoxon", stat, p,
                           adj, letter_display(mean_ranks, sig), note)
    stat, p, mean_ranks = friedman(pm)
    ph = pairwise_posthoc(pm, q.method)
    sig = ph.adjusted < q.alpha
    np.fill_diagonal(sig, False)
    return RankSummary(q.metric, pm.columns, mean_ranks, len(pm.rows), ph.method, stat, p,
                       ph.adjusted, letter_display(mean_ranks, sig), ph.note)
