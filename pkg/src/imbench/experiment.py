"""Experimental protocol: random search, nested tuning, repeated holdout, grids.

One repetition of a cell: stratified holdout split, random-search tuning
with stratified inner folds on the training part, refit on the whole
training part with the winning parameters, evaluation on the test part
with the metric used for tuning.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .classifiers import ClassifierSpec, predict_scores
from .data import (DataError, SplitPlan, binarize, imbalance_levels, load_csv,
                   make_synthetic, split_holdout, stratified_kfold)
from .metrics import METRIC_RANGES, MetricKind, ScoredPredictions, evaluate
from .seeding import derive_seed, rng_for
from .strategies import BAG_SIZES, STRATEGY_PARAMS, StrategySpec, fit_solution

log = logging.getLogger("imbench")

RESULTS_SCHEMA = "# imbench-results 1"
RESULT_COLUMNS = ("dataset", "rate", "solution", "strategy", "classifier", "metric",
                  "repetition", "value", "status", "seed", "params")
JOBS_ENV = "IMBENCH_JOBS"


class ConfigError(ValueError):
    pass


# -- search spaces ---------------------------------------------------------

@dataclass(frozen=True)
class Choice:
    values: tuple

    def sample(self, rng, n_features=None):
        v = self.values[int(rng.integers(0, len(self.values)))]
        return v.item() if hasattr(v, "item") else v


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def sample(self, rng, n_features=None):
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class LogUniform:
    low: float
    high: float
    integer: bool = False

    def sample(self, rng, n_features=None):
        v = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        if self.integer:
            return int(min(max(round(v), math.ceil(self.low)), math.floor(self.high)))
        return float(min(max(v, self.low), self.high))


@dataclass(frozen=True)
class IntUniform:
    """Uniform integer in ``[low, high]``; ``high="d"`` means the feature count."""

    low: int
    high: int | str

    def sample(self, rng, n_features=None):
        high = self.high
        if high == "d":
            if n_features is None:
                raise ValueError("feature count needed to resolve an upper bound of 'd'")
            high = n_features
        return int(rng.integers(self.low, int(high) + 1))


CLASSIFIER_SPACES = {
    "cart": {},
    "one_nn": {},
    "random_forest": {"mtry": IntUniform(1, "d"), "ntree": LogUniform(2**4, 2**12, integer=True)},
    "gradient_boosting": {
        "max_depth": IntUniform(1, 6),
        "eta": LogUniform(0.005, 0.05),
        "nrounds": Choice(tuple(range(20, 141, 20))),
    },
}
STRATEGY_SPACES = {
    "underbagging": {"n": Choice(BAG_SIZES)},
    "rusboost": {"nboost": Choice(BAG_SIZES)},
}


def parse_param(value):
    """Build a distribution from its config form (scalar, or a one-key mapping)."""
    if not isinstance(value, dict):
        return Choice((value,))
    v = dict(value)
    integer = bool(v.pop("integer", False))
    if len(v) != 1:
        raise ConfigError(f"cannot parse parameter range {value!r}")
    kind, arg = next(iter(v.items()))
    if kind == "choice":
        return Choice(tuple(arg))
    lo, hi = arg
    if kind == "uniform":
        return Uniform(float(lo), float(hi))
    if kind == "loguniform":
        return LogUniform(float(lo), float(hi), integer)
    if kind == "int":
        return IntUniform(int(lo), hi if hi == "d" else int(hi))
    raise ConfigError(f"unknown range kind {kind!r}")


def sample_hyperparameters(space: dict, count: int, rng_seed: int, n_features: int | None = None):
    """``count`` independent parameter maps drawn from ``space``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if not space:
        return [{}]
    rng = rng_for(rng_seed, "hyperparameters")
    return [{k: space[k].sample(rng, n_features) for k in sorted(space)} for _ in range(count)]


@dataclass(frozen=True)
class SolutionSpec:
    strategy: StrategySpec
    classifier: ClassifierSpec | None
    space: dict = field(default_factory=dict)

    @property
    def id(self) -> str:
        if self.classifier is None:
            return self.strategy.kind
        return f"{self.classifier.short_name}+{self.strategy.kind}"

    def configured(self, params: dict):
        """Split a sampled parameter map into the strategy and classifier specs it implies."""
        own = STRATEGY_PARAMS.get(self.strategy.kind, ())
        sp = {k: v for k, v in params.items() if k in own}
        cp = {k: v for k, v in params.items() if k not in own}
        strategy = StrategySpec(self.strategy.kind, {**self.strategy.params, **sp})
        clf = self.classifier.with_params(**cp) if self.classifier is not None else None
        return strategy, clf


def make_solution(strategy: str, classifier: str | None = None, space: dict | None = None,
                  strategy_params: dict | None = None, classifier_params: dict | None = None):
    """Solution with the default search space for its parts, updated by ``space``."""
    st = StrategySpec(strategy, strategy_params or {})
    if st.kind == "rusboost":
        clf = None
    else:
        if classifier is None:
            raise ValueError(f"strategy {strategy!r} needs a classifier")
        clf = ClassifierSpec(classifier, classifier_params or {})
    full = dict(STRATEGY_SPACES.get(st.kind, {}))
    if clf is not None:
        full.update(CLASSIFIER_SPACES[clf.kind])
    for k, v in (space or {}).items():
        full[k] = v if hasattr(v, "sample") else parse_param(v)
    return SolutionSpec(st, clf, full)


# -- tuning and cells ------------------------------------------------------

def _key(params) -> str:
    return json.dumps(params, sort_keys=True)


def _scores(solution, params, train, test, seed):
    strategy, clf = solution.configured(params)
    model = fit_solution(strategy, clf, train, seed)
    return ScoredPredictions(predict_scores(model, test.features), test.y)


def _tune_many(solution, train, metrics, folds, candidates, rng_seed):
    """Best parameter map per metric; fits are shared across metrics."""
    params = sample_hyperparameters(solution.space, candidates, derive_seed(rng_seed, "candidates"),
                                    train.n_features)
    if len({_key(p) for p in params}) == 1:
        return {m: params[0] for m in metrics}
    splits = stratified_kfold(train, folds, derive_seed(rng_seed, "folds"))
    cache = {}
    means = {m: [] for m in metrics}
    for p in params:
        key = _key(p)
        if key not in cache:
            per_fold = []
            for f, (tr, va) in enumerate(splits):
                sp = _scores(solution, p, tr, va, derive_seed(rng_seed, "fit", key, f))
                per_fold.append({m: evaluate(m, sp) for m in metrics})
            cache[key] = {m: float(np.mean([r[m] for r in per_fold])) for m in metrics}
        for m in metrics:
            means[m].append(cache[key][m])
    # argmax keeps the earliest candidate on ties
    return {m: params[int(np.argmax(means[m]))] for m in metrics}


def tune(solution: SolutionSpec, train, metric, folds: int = 3, candidates: int = 10,
         rng_seed: int = 0) -> dict:
    """Random-search the parameter map with the best mean inner-fold ``metric``."""
    metric = MetricKind(metric).value
    return _tune_many(solution, train, [metric], folds, candidates, rng_seed)[metric]


@dataclass
class CellResult:
    dataset: str
    rate: float
    solution: str
    strategy: str
    classifier: str
    metric: str
    repetition: int
    value: float
    params: dict
    seed: int
    status: str = "ok"

    @property
    def key(self):
        return (self.dataset, repr(float(self.rate)), self.solution, self.metric, self.repetition)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def row(self):
        return {
            "dataset": self.dataset, "rate": repr(float(self.rate)), "solution": self.solution,
            "strategy": self.strategy, "classifier": self.classifier, "metric": self.metric,
            "repetition": str(self.repetition), "value": repr(float(self.value)),
            "status": self.status, "seed": str(self.seed), "params": _key(self.params),
        }

    @classmethod
    def from_row(cls, r):
        return cls(r["dataset"], float(r["rate"]), r["solution"], r["strategy"], r["classifier"],
                   r["metric"], int(r["repetition"]), float(r["value"]), json.loads(r["params"]),
                   int(r["seed"]), r["status"])


def cell_seed(master_seed, dataset, rate, solution_id, repetition) -> int:
    # metric is deliberately not part of the seed: the metrics of one
    # repetition share their fits
    return derive_seed(master_seed, "cell", dataset, repr(float(rate)), solution_id, repetition)


def split_seed(master_seed, dataset, rate) -> int:
    return derive_seed(master_seed, "split", dataset, repr(float(rate)))


def run_repetition(ds, solution: SolutionSpec, metrics, plan: SplitPlan, repetition: int,
                   candidates: int = 10, rate: float | None = None, master_seed: int | None = None):
    """All metrics for one repetition of one (dataset, rate, solution)."""
    rate = round(ds.imbalance_rate, 6) if rate is None else rate
    master = plan.seed if master_seed is None else master_seed
    metrics = [MetricKind(m).value for m in metrics]
    seed = cell_seed(master, ds.name, rate, solution.id, repetition)
    clf = solution.classifier.short_name if solution.classifier else ""

    def result(metric, value, params, status="ok"):
        return CellResult(ds.name, rate, solution.id, solution.strategy.kind, clf, metric,
                          repetition, value, params, seed, status)

    try:
        split = SplitPlan(plan.test_fraction, plan.repetitions, plan.inner_folds,
                          split_seed(master, ds.name, rate))
        train, test = split_holdout(ds, split, repetition)
        assert not np.intersect1d(train.index, test.index).size, "test rows leaked into training"
        best = _tune_many(solution, train, metrics, plan.inner_folds, candidates, seed)
        fitted = {}
        out = []
        for m in metrics:
            key = _key(best[m])
            if key not in fitted:
                fitted[key] = _scores(solution, best[m], train, test, derive_seed(seed, "final", key))
            value = evaluate(m, fitted[key])
            lo, hi = METRIC_RANGES[m]
            assert lo - 1e-12 <= value <= hi + 1e-12, f"{m}={value} out of range"
            out.append(result(m, value, best[m]))
        return out
    except Exception as exc:  # recorded per cell; the grid carries on
        msg = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
        return [result(m, float("nan"), {}, msg) for m in metrics]


def run_cell(ds, solution: SolutionSpec, metric, plan: SplitPlan, candidates: int = 10,
             rate: float | None = None, master_seed: int | None = None):
    """One :class:`CellResult` per repetition of ``plan``."""
    return [r for rep in range(plan.repetitions)
            for r in run_repetition(ds, solution, [metric], plan, rep, candidates, rate, master_seed)]


# -- result tables ---------------------------------------------------------

class ResultTable:
    def __init__(self, results=()):
        self.results = list(results)

    def __len__(self):
        return len(self.results)

    def __iter__(self):
        return iter(self.results)

    def sorted(self) -> ResultTable:
        return ResultTable(sorted(self.results, key=lambda r: r.key))

    def keys(self):
        return {r.key for r in self.results}

    def aggregate(self):
        """Mean value per (dataset, rate, solution, metric); groups with a failed repetition are dropped."""
        groups = {}
        for r in self.results:
            groups.setdefault((r.dataset, r.rate, r.solution, r.metric), []).append(r)
        out = {}
        for k, rs in groups.items():
            if all(r.ok for r in rs):
                out[k] = float(np.mean([r.value for r in rs]))
        return out

    def solution_info(self):
        return {r.solution: (r.strategy, r.classifier) for r in self.results}

    def write_csv(self, path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with tmp.open("w", newline="", encoding="utf-8") as fh:
            fh.write(RESULTS_SCHEMA + "\n")
            w = csv.DictWriter(fh, RESULT_COLUMNS, lineterminator="\n")
            w.writeheader()
            for r in self.results:
                w.writerow(r.row())
        os.replace(tmp, path)

    @classmethod
    def read_csv(cls, path) -> ResultTable:
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            first = fh.readline().rstrip("\n")
            if first != RESULTS_SCHEMA:
                raise ValueError(f"{path}: not a results file (first line {first!r})")
            return cls(CellResult.from_row(r) for r in csv.DictReader(fh))


class _Sink:
    """Append-only results file."""

    def __init__(self, path):
        self.path = Path(path)
        new = not self.path.exists() or self.path.stat().st_size == 0
        self.fh = self.path.open("a", newline="", encoding="utf-8")
        self.w = csv.DictWriter(self.fh, RESULT_COLUMNS, lineterminator="\n")
        if new:
            self.fh.write(RESULTS_SCHEMA + "\n")
            self.w.writeheader()

    def append(self, results):
        for r in results:
            self.w.writerow(r.row())
        self.fh.flush()

    def close(self):
        self.fh.close()


# -- configuration and grids -----------------------------------------------

@dataclass
class DatasetConfig:
    name: str
    path: Path | None = None
    label: str | None = None
    positive: str | None = None
    synthetic: dict | None = None

    def load(self):
        if self.synthetic is not None:
            s = self.synthetic
            return make_synthetic(s.get("family", "gaussians"), int(s["n"]), int(s["dim"]),
                                  float(s.get("overlap", 1.0)), float(s.get("rate", 0.05)),
                                  int(s.get("seed", 0)), self.name)
        ds = load_csv(self.path, self.label, self.positive, self.name)
        return ds if self.positive is not None else binarize(ds)


@dataclass
class ExperimentConfig:
    datasets: list
    solutions: list
    rates: list = field(default_factory=lambda: [0.05])
    metrics: list = field(default_factory=lambda: list(("auc", "acc", "f1", "gmean", "mcc", "bac")))
    repetitions: int = 3
    inner_folds: int = 3
    candidates: int = 10
    test_fraction: float = 0.2
    master_seed: int = 0
    output_path: Path = Path("results.csv")
    jobs: int | None = None

    @property
    def plan(self) -> SplitPlan:
        return SplitPlan(self.test_fraction, self.repetitions, self.inner_folds, self.master_seed)


def _config_from_mapping(raw, base: Path) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = {"datasets", "solutions", "rates", "metrics", "repetitions", "inner_folds",
             "candidates", "test_fraction", "master_seed", "output_path", "jobs"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for req in ("datasets", "solutions"):
        if not raw.get(req):
            raise ConfigError(f"config needs a non-empty {req!r} list")
    datasets, names = [], set()
    for i, d in enumerate(raw["datasets"]):
        if not isinstance(d, dict) or "name" not in d:
            raise ConfigError(f"datasets[{i}] needs a name")
        if d["name"] in names:
            raise ConfigError(f"duplicate dataset name {d['name']!r}")
        names.add(d["name"])
        if "synthetic" in d:
            datasets.append(DatasetConfig(d["name"], synthetic=dict(d["synthetic"])))
            continue
        if "path" not in d or "label" not in d:
            raise ConfigError(f"datasets[{i}] needs either 'synthetic' or 'path' and 'label'")
        path = (base / d["path"]).resolve()
        if not path.is_file():
            raise ConfigError(f"datasets[{i}]: file not found: {path}")
        datasets.append(DatasetConfig(d["name"], path, d["label"], d.get("positive")))
    solutions = []
    for i, s in enumerate(raw["solutions"]):
        try:
            solutions.append(make_solution(s["strategy"], s.get("classifier"), s.get("space"),
                                           s.get("strategy_params"), s.get("classifier_params")))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"solutions[{i}]: {exc}") from None
    ids = [s.id for s in solutions]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate solutions: {ids}")
    metrics = [MetricKind(m).value for m in raw.get("metrics", ["auc", "acc", "f1", "gmean", "mcc", "bac"])]
    cfg = ExperimentConfig(
        datasets, solutions,
        rates=[float(r) for r in raw.get("rates", [0.05])],
        metrics=metrics,
        repetitions=int(raw.get("repetitions", 3)),
        inner_folds=int(raw.get("inner_folds", 3)),
        candidates=int(raw.get("candidates", 10)),
        test_fraction=float(raw.get("test_fraction", 0.2)),
        master_seed=int(raw.get("master_seed", 0)),
        output_path=(base / raw.get("output_path", "results.csv")).resolve(),
        jobs=raw.get("jobs"),
    )
    cfg.plan  # validates split settings
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: config file not found")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: {where}: {getattr(exc, 'problem', exc)}") from None
    try:
        return _config_from_mapping(raw, path.parent)
    except (DataError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def default_jobs() -> int:
    return max(1, int(os.environ.get(JOBS_ENV, "1")))


def _job(args):
    return run_repetition(*args)


def run_grid(config: ExperimentConfig, jobs: int | None = None) -> ResultTable:
    """Run every (dataset, rate, solution, metric, repetition) cell not yet in the results file.

    The file is appended as jobs finish and rewritten in canonical order at
    the end, so the final bytes depend only on the config.
    """
    jobs = jobs or config.jobs or default_jobs()
    out = Path(config.output_path)
    done = ResultTable.read_csv(out) if out.exists() and out.stat().st_size else ResultTable()
    have = done.keys()

    work = []
    for dc in config.datasets:
        ds = dc.load()
        levels, skipped = imbalance_levels(ds, config.rates,
                                           derive_seed(config.master_seed, "prepare", dc.name))
        for rate, reason in sorted(skipped.items()):
            log.warning("dataset %s excluded at rate %g: %s", dc.name, rate, reason)
        for rate in sorted(levels, reverse=True):
            for sol in config.solutions:
                for rep in range(config.repetitions):
                    keys = {(dc.name, repr(float(rate)), sol.id, m, rep) for m in config.metrics}
                    if keys <= have:
                        continue
                    work.append((levels[rate], sol, config.metrics, config.plan, rep,
                                 config.candidates, rate, config.master_seed))

    results = list(done)
    sink = _Sink(out)
    executed = 0
    try:
        if jobs > 1 and len(work) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_job, w) for w in work]
                for fut in as_completed(futures):
                    rs = [r for r in fut.result() if r.key not in have]
                    sink.append(rs)
                    results.extend(rs)
                    executed += len(rs)
                    _log_progress(rs, executed)
        else:
            for w in work:
                rs = [r for r in _job(w) if r.key not in have]
                sink.append(rs)
                results.extend(rs)
                executed += len(rs)
                _log_progress(rs, executed)
    finally:
        sink.close()
    table = ResultTable(results).sorted()
    table.write_csv(out)
    log.info("%d cells executed, %d already present", executed, len(done))
    return table


def _log_progress(rs, executed):
    for r in rs:
        if not r.ok:
            log.error("cell %s/%s/%s/%s rep %d %s", r.dataset, r.rate, r.solution, r.metric,
                      r.repetition, r.status)
    if rs:
        r = rs[0]
        log.info("done %s rate=%g %s rep %d (%d cells so far)", r.dataset, r.rate, r.solution,
                 r.repetition, executed)
