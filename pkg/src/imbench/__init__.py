"""Benchmarking strategies for imbalanced binary classification."""

from .classifiers import ClassifierSpec, fit
from .data import BinaryDataset, Dataset, SplitPlan, load_csv, make_synthetic
from .experiment import ResultTable, load_config, run_grid
from .metrics import MetricKind, auc, evaluate
from .stats import Question, compare
from .strategies import StrategySpec, fit_solution

__version__ = "0.1.0"
