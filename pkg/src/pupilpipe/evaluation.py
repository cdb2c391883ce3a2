"""Leave-one-participant-out evaluation.

Every outer fold holds out all days of one participant. Inside the fold,
feature selection, SMOTE balancing and hyperparameter tuning see only the
training participants; the held-out days are scored once by the final tree.
Metrics are computed on the pooled held-out predictions of all folds.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .features import FEATURE_NAMES, LabeledDay, feature_matrix
from .learner import (
    Dataset, ForestParams, MetricsReport, SingleClassAUROC, TreeParams, auroc, balance_training,
    compute_metrics, derive_seed, fit_forest, fit_tree, gini_importances, predict_scores, select_fs,
    tree_to_json,
)
from .stats import EmptySelection, SingleClass, correlate_columns, select_tsf

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(
    TreeParams(max_depth=d, min_samples_leaf=m)
    for d in (2, 3, 4, 5, 8, None)
    for m in (1, 5, 10)
)
MAX_INNER_FOLDS = 10
FEATURE_SETS = {"fs": "FS", "tsf": "TSF", "all": "All"}
REPORT_HEADER = ["feature_set", "acc", "prec", "rec", "f1", "auroc"]


class TooFewGroups(ValueError):
    pass


class EmptySelectionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[str, tuple[str, ...]], ...]

    def __len__(self) -> int:
        return len(self.folds)


def plan_lopo(days: Sequence[LabeledDay] | Dataset) -> FoldPlan:
    groups = days.groups if isinstance(days, Dataset) else [d.participant_id for d in days]
    pids = sorted(set(groups))
    if len(pids) < 2:
        raise TooFewGroups(f"LOPO needs at least 2 participants, got {len(pids)}")
    return FoldPlan(tuple((p, tuple(q for q in pids if q != p)) for p in pids))


def days_to_dataset(days: Sequence[LabeledDay]) -> Dataset:
    X, y, groups = feature_matrix(days)
    return Dataset(X, y, groups, FEATURE_NAMES)


# -- feature selection ------------------------------------------------------------


def select_features(train: Dataset, feature_set, seed: int = 0) -> list[str]:
    """Resolve ``feature_set`` ("fs", "tsf", "all" or explicit names) on ``train``.

    When the TSF rule selects nothing, all features are kept (no feature is
    privileged without evidence) and an :class:`EmptySelectionWarning` is
    emitted.
    """
    if not isinstance(feature_set, str):
        return list(feature_set)
    key = feature_set.lower()
    if key == "all":
        return list(train.feature_names)
    if key == "tsf":
        table = correlate_columns(train.X, train.y, train.feature_names)
        try:
            return select_tsf(table)
        except EmptySelection:
            warnings.warn("TSF rule selected nothing; falling back to all features",
                          EmptySelectionWarning, stacklevel=2)
            return list(train.feature_names)
    if key == "fs":
        forest = fit_forest(train, ForestParams(), seed)
        return select_fs(gini_importances(forest))
    raise ValueError(f"unknown feature set {feature_set!r}")


# -- tuning -----------------------------------------------------------------------


def _depth_key(p: TreeParams) -> float:
    return math.inf if p.max_depth is None else p.max_depth


def inner_folds(groups: np.ndarray, max_folds: int = MAX_INNER_FOLDS) -> list[list[str]]:
    """Participants assigned round-robin (sorted order) to at most ``max_folds`` folds."""
    pids = sorted(set(groups))
    k = min(max_folds, len(pids))
    return [pids[i::k] for i in range(k)]


def tune_hyperparams(train: Dataset, grid: Sequence[TreeParams] = DEFAULT_GRID, seed: int = 0,
                     max_inner_folds: int = MAX_INNER_FOLDS) -> TreeParams:
    """Pick the grid point with the best mean inner leave-participant-out AUROC.

    Each inner fold is SMOTE-balanced on its own training part. Inner folds
    whose held-out part has a single class carry no AUROC and are skipped;
    if none is left the pooled inner AUROC is used. Ties go to the shallower
    tree, then to the larger ``min_samples_leaf``.
    """
    grid = list(grid)
    if len(grid) == 1:
        return grid[0]
    if train.y.all() or not train.y.any():
        raise SingleClass("tuning needs both classes")
    folds = inner_folds(train.groups, max_inner_folds)
    if len(folds) < 3:
        raise ValueError("tuning needs at least 3 training participants")

    # One unlimited-depth tree per (min_samples_leaf, min_impurity_decrease);
    # depth-limited variants are read from it by truncation.
    growth = sorted({(p.min_samples_leaf, p.min_impurity_decrease) for p in grid})
    scores = {p: [] for p in grid}
    truth = []
    for f, held in enumerate(folds):
        mask = np.isin(train.groups, held)
        inner, outer = train.subset(~mask), train.subset(mask)
        if inner.y.all() or not inner.y.any():
            continue
        balanced = balance_training(inner, derive_seed(seed, f))
        truth.append(outer.y)
        for msl, mid in growth:
            tree = fit_tree(balanced, TreeParams(None, msl, mid))
            for p in grid:
                if (p.min_samples_leaf, p.min_impurity_decrease) == (msl, mid):
                    scores[p].append(predict_scores(tree, outer.X, max_depth=p.max_depth))
    y_all = np.concatenate(truth)

    scoring = [i for i, t in enumerate(truth) if t.any() and not t.all()]

    def key(p):
        try:
            if scoring:
                auc = float(np.mean([auroc(scores[p][i], truth[i]) for i in scoring]))
            else:
                auc = auroc(np.concatenate(scores[p]), y_all)
        except SingleClassAUROC:
            auc = 0.5
        return (-auc, _depth_key(p), -p.min_samples_leaf, p.min_impurity_decrease)

    return min(grid, key=key)


# -- outer loop -------------------------------------------------------------------


@dataclass
class FoldModel:
    held_out: str
    features: list[str]
    params: TreeParams
    model_json: str

    @property
    def tree(self):
        from .learner import tree_from_json

        return tree_from_json(self.model_json)[0]


def fit_fold(data: Dataset, held_out: str, fold_index: int, feature_set, grid=DEFAULT_GRID,
             seed: int = 0, fixed_features: Sequence[str] | None = None) -> FoldModel:
    """Train the model of one outer fold without touching ``held_out``'s rows.

    All sub-seeds derive from ``(seed, fold_index)`` only.
    """
    train = data.subset(data.groups != held_out)
    fold_seed = derive_seed(seed, fold_index)
    features = list(fixed_features) if fixed_features is not None else select_features(
        train, feature_set, derive_seed(fold_seed, 1))
    train = train.columns(features)
    params = tune_hyperparams(train, grid, derive_seed(fold_seed, 2))
    balanced = balance_training(train, derive_seed(fold_seed, 3))
    tree = fit_tree(balanced, params)
    return FoldModel(held_out, features, params, tree_to_json(tree, features, params))


@dataclass
class Prediction:
    participant_id: str
    date: str
    fold: int
    score: float
    predicted: bool
    label: bool


@dataclass
class EvalReport:
    feature_set: str
    metrics: MetricsReport
    predictions: list[Prediction] = field(default_factory=list)
    folds: list[FoldModel] = field(default_factory=list)
    seed: int = 0
    selection: str = "fold"
    timings: dict = field(default_factory=dict)

    def to_json(self, include_timings: bool = False) -> str:
        doc = {
            "feature_set": self.feature_set,
            "seed": self.seed,
            "selection": self.selection,
            "metrics": dict(zip(REPORT_HEADER[1:], self.metrics.row()))
            | {"tp": self.metrics.tp, "fp": self.metrics.fp, "tn": self.metrics.tn, "fn": self.metrics.fn},
            "folds": [
                {"held_out": f.held_out, "features": f.features,
                 "params": {"max_depth": f.params.max_depth, "min_samples_leaf": f.params.min_samples_leaf,
                            "min_impurity_decrease": f.params.min_impurity_decrease}}
                for f in self.folds
            ],
            "predictions": [
                [p.participant_id, p.date, p.fold, round(p.score, 12), int(p.predicted), int(p.label)]
                for p in self.predictions
            ],
        }
        if include_timings:
            doc["timings"] = self.timings
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=True)


def run_lopo(days: Sequence[LabeledDay], feature_set="tsf", grid=DEFAULT_GRID, seed: int = 0,
             selection: str = "fold") -> EvalReport:
    """Pooled leave-one-participant-out evaluation of one feature set.

    ``selection="fold"`` recomputes feature selection on every fold's
    training participants. ``selection="global"`` selects once on all days
    before splitting, which leaks held-out labels into the feature choice.
    """
    if selection not in ("fold", "global"):
        raise ValueError("selection must be 'fold' or 'global'")
    t0 = time.perf_counter()
    data = days_to_dataset(days)
    plan = plan_lopo(data)
    fixed = None
    if selection == "global":
        fixed = select_features(data, feature_set, derive_seed(seed, 10**6))
    label = FEATURE_SETS.get(feature_set, "custom") if isinstance(feature_set, str) else "custom"
    report = EvalReport(label, None, seed=seed, selection=selection)
    dates = np.array([d.date.isoformat() for d in days], dtype=object)
    scores = np.empty(len(days))
    fold_of = np.empty(len(days), dtype=int)
    for i, (held, _train) in enumerate(plan.folds):
        fm = fit_fold(data, held, i, feature_set, grid, seed, fixed)
        mask = data.groups == held
        Xh = data.columns(fm.features).X[mask]
        scores[mask] = predict_scores(fm.tree, Xh)
        fold_of[mask] = i
        report.folds.append(fm)
    order = np.lexsort((dates, data.groups.astype(str)))
    for j in order:
        report.predictions.append(Prediction(str(data.groups[j]), dates[j], int(fold_of[j]),
                                             float(scores[j]), bool(scores[j] >= 0.5), bool(data.y[j])))
    report.metrics = compute_metrics(scores, data.y)
    report.timings["total_s"] = time.perf_counter() - t0
    return report


def compare_feature_sets(days: Sequence[LabeledDay], seed: int = 0, grid=DEFAULT_GRID,
                         feature_sets: Sequence[str] = ("fs", "tsf", "all"),
                         selection: str = "fold") -> dict[str, EvalReport]:
    return {FEATURE_SETS[fs]: run_lopo(days, fs, grid, seed, selection) for fs in feature_sets}


def write_report_csv(reports: dict[str, EvalReport], fh: IO[str], paper_format: bool = False) -> None:
    fmt = "{:.2f}" if paper_format else "{:.6f}"
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for name, rep in reports.items():
        w.writerow([name, *(fmt.format(v) for v in rep.metrics.row())])


def thread_cap() -> int:
    """Parallelism cap from ``PUPILPIPE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("PUPILPIPE_THREADS", "1")))
    except ValueError:
        return 1
