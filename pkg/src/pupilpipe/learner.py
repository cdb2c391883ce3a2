"""Tree learners, SMOTE oversampling and classification metrics.

Everything here is written against plain numpy arrays: ``X`` is
``(n_samples, n_features)`` float, ``y`` is boolean with ``True`` meaning
depressive. All randomness comes from an explicit integer seed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .stats import SingleClass

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
SYNTHETIC_GROUP = "__synthetic__"
_GAIN_TIE_EPS = 1e-12


class TooFewSamples(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class SingleClassAUROC(ValueError):
    pass


class FallbackSelectionWarning(UserWarning):
    pass


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 32-bit sub-seed for ``(seed, *keys)``."""
    return int(np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, keys)]).generate_state(1)[0])


# -- datasets -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != len(self.y) or len(self.y) != len(self.groups):
            raise ValueError("X, y, groups must agree in length and X must be 2-D")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names must match X columns")
        if np.isnan(self.X).any():
            raise ValueError("dataset contains missing values")

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, mask) -> "Dataset":
        return Dataset(self.X[mask], self.y[mask], self.groups[mask], self.feature_names)

    def columns(self, names: Sequence[str]) -> "Dataset":
        idx = [self.feature_names.index(n) for n in names]
        return Dataset(self.X[:, idx], self.y, self.groups, tuple(names))


# -- SMOTE --------------------------------------------------------------------


def smote_oversample(minority: np.ndarray, k: int, n_synthetic: int, seed: int) -> np.ndarray:
    """Interpolate ``n_synthetic`` rows between minority rows and their neighbours.

    Each synthetic row is ``x + u * (x_nn - x)`` for a uniformly drawn
    minority row ``x``, one of its ``k`` nearest minority neighbours
    ``x_nn`` (Euclidean, drawn uniformly) and ``u ~ U[0, 1]``.
    ``k`` is clamped to ``len(minority) - 1``.
    """
    minority = np.asarray(minority, dtype=float)
    n = len(minority)
    if n < 2:
        raise TooFewSamples(f"SMOTE needs at least 2 minority rows, got {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_synthetic <= 0:
        return np.empty((0, minority.shape[1]))
    k = min(k, n - 1)
    d2 = ((minority[:, None, :] - minority[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps lower index first among equidistant neighbours
    nn = np.argsort(d2, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    base = rng.integers(0, n, size=n_synthetic)
    pick = nn[base, rng.integers(0, k, size=n_synthetic)]
    u = rng.random(n_synthetic)[:, None]
    x = minority[base]
    return x + u * (minority[pick] - x)


def balance_training(train: Dataset, seed: int, k: int = 5) -> Dataset:
    """Append SMOTE rows to the minority class until both classes are equal in size."""
    n_pos = int(train.y.sum())
    n_neg = len(train.y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("cannot balance a single-class training set")
    if n_pos == n_neg:
        return train
    minority_label = n_pos < n_neg
    minority = train.X[train.y == minority_label]
    synth = smote_oversample(minority, k, abs(n_pos - n_neg), seed)
    return Dataset(
        np.vstack([train.X, synth]),
        np.concatenate([train.y, np.full(len(synth), minority_label)]),
        np.concatenate([train.groups, np.full(len(synth), SYNTHETIC_GROUP, dtype=object)]),
        train.feature_names,
    )


# -- CART ---------------------------------------------------------------------


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    min_impurity_decrease: float = 0.0


@dataclass(eq=False)
class Tree:
    """Binary CART tree in flat-array form.

    Node ``i`` is a leaf when ``feature[i] == -1``. Rows with
    ``x[feature] <= threshold`` go to ``left[i]``. ``counts[i]`` holds the
    (negative, positive) training counts reaching the node, ``gain[i]`` the
    impurity decrease of its split (0 at leaves).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    counts: np.ndarray
    impurity: np.ndarray
    gain: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0

    def to_dict(self, i: int = 0) -> dict:
        neg, pos = (int(c) for c in self.counts[i])
        if self.is_leaf(i):
            return {"leaf": {"class_counts": [neg, pos]}}
        return {
            "split": {
                "feature_index": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "class_counts": [neg, pos],
                "left": self.to_dict(int(self.left[i])),
                "right": self.to_dict(int(self.right[i])),
            }
        }


def _gini(pos, n):
    p = pos / n
    return 2.0 * p * (1.0 - p)


def _best_split(Xn: np.ndarray, yn: np.ndarray, feats: np.ndarray, msl: int):
    """Best (feature, threshold, gain) over ``feats`` or ``None`` when nothing is splittable."""
    n = len(yn)
    sub = Xn[:, feats]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = yn[order].astype(float)
    pos_left = np.cumsum(ys, axis=0)[:-1]  # left child = first i+1 rows
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    pos_total = float(yn.sum())
    pos_right = pos_total - pos_left
    child = (n_left * _gini(pos_left, n_left) + n_right * _gini(pos_right, n_right)) / n
    gain = _gini(pos_total, n) - child
    valid = xs[:-1] < xs[1:]
    if msl > 1:
        sizes = n_left[:, 0]
        valid &= ((sizes >= msl) & (n - sizes >= msl))[:, None]
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    # ties: lowest original feature index, then lowest threshold
    cand_cols = np.flatnonzero((gain >= best - _GAIN_TIE_EPS).any(axis=0))
    col = cand_cols[np.argmin(feats[cand_cols])]
    row = int(np.flatnonzero(gain[:, col] >= best - _GAIN_TIE_EPS)[0])
    thr = (xs[row, col] + xs[row + 1, col]) / 2.0
    if thr >= xs[row + 1, col]:  # adjacent floats: midpoint rounds up
        thr = xs[row, col]
    return int(feats[col]), float(thr), float(gain[row, col])


def _grow(X, y, params: TreeParams, max_features: int | None, rng) -> Tree:
    n_total, d = X.shape
    feature, threshold, left, right, depth, counts, impurity, gain = ([] for _ in range(8))
    all_feats = np.arange(d)
    msl = max(1, params.min_samples_leaf)
    max_depth = math.inf if params.max_depth is None else params.max_depth

    def new_node(idx, dep):
        pos = int(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        depth.append(dep)
        counts.append((len(idx) - pos, pos))
        impurity.append(_gini(pos, len(idx)))
        gain.append(0.0)
        return len(feature) - 1

    stack = [(new_node(np.arange(n_total), 0), np.arange(n_total))]
    while stack:
        node, idx = stack.pop()
        n = len(idx)
        neg, pos = counts[node]
        if depth[node] >= max_depth or pos == 0 or neg == 0 or n < 2 * msl:
            continue
        if max_features is not None and max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            feats = all_feats
        found = _best_split(X[idx], y[idx], feats, msl)
        if found is None:
            continue
        f, thr, g = found
        if g < params.min_impurity_decrease or g < -_GAIN_TIE_EPS:
            continue
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node], gain[node] = f, thr, max(g, 0.0)
        left[node] = new_node(li, depth[node] + 1)
        right[node] = new_node(ri, depth[node] + 1)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], ri))
        stack.append((left[node], li))

    return Tree(
        feature=np.array(feature, dtype=int),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=int),
        right=np.array(right, dtype=int),
        depth=np.array(depth, dtype=int),
        counts=np.array(counts, dtype=int).reshape(-1, 2),
        impurity=np.array(impurity, dtype=float),
        gain=np.array(gain, dtype=float),
        n_features=d,
    )


def fit_tree(train: Dataset, params: TreeParams = TreeParams(), seed: int = 0,
             max_features: int | None = None) -> Tree:
    """Fit a Gini CART tree.

    Candidate thresholds are midpoints between consecutive distinct values.
    Splits with zero gain are taken while the node is impure (this is what
    lets a depth-2 tree solve XOR); ``min_impurity_decrease`` raises that
    floor. ``max_features`` restricts each split to a random feature subset,
    drawn from ``seed``.
    """
    if len(train) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    return _grow(train.X, np.asarray(train.y, dtype=bool), params, max_features, rng)


def predict_scores(tree: Tree, X: np.ndarray, max_depth: int | None = None) -> np.ndarray:
    """Positive-class fraction of the leaf each row reaches.

    With ``max_depth`` the tree is read as if it had been grown with that
    depth limit: nodes at that depth act as leaves.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != tree.n_features:
        raise DimensionMismatch(f"tree expects {tree.n_features} features, got {X.shape[1]}")
    limit = math.inf if max_depth is None else max_depth
    node = np.zeros(len(X), dtype=int)
    active = np.ones(len(X), dtype=bool)
    while True:
        f = tree.feature[node]
        active &= (f >= 0) & (tree.depth[node] < limit)
        if not active.any():
            break
        rows = np.flatnonzero(active)
        nd = node[rows]
        go_left = X[rows, tree.feature[nd]] <= tree.threshold[nd]
        node[rows] = np.where(go_left, tree.left[nd], tree.right[nd])
    c = tree.counts[node]
    return c[:, 1] / c.sum(axis=1)


def predict_score(tree: Tree, row: Sequence[float]) -> float:
    return float(predict_scores(tree, np.asarray(row, dtype=float)[None, :])[0])


def tree_to_json(tree: Tree, feature_names: Sequence[str], params: TreeParams | None = None) -> str:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "decision_tree",
        "feature_names": list(feature_names),
        "params": None if params is None else {
            "max_depth": params.max_depth,
            "min_samples_leaf": params.min_samples_leaf,
            "min_impurity_decrease": params.min_impurity_decrease,
        },
        "tree": tree.to_dict(),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def tree_from_json(text: str) -> tuple[Tree, list[str]]:
    doc = json.loads(text)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')}")
    names = doc["feature_names"]
    cols = {k: [] for k in ("feature", "threshold", "left", "right", "depth", "counts")}

    def walk(node, dep):
        i = len(cols["feature"])
        for k in cols:
            cols[k].append(None)
        cols["depth"][i] = dep
        if "leaf" in node:
            cols["feature"][i], cols["threshold"][i] = -1, 0.0
            cols["left"][i] = cols["right"][i] = -1
            cols["counts"][i] = node["leaf"]["class_counts"]
            return i
        s = node["split"]
        cols["feature"][i], cols["threshold"][i] = s["feature_index"], s["threshold"]
        cols["counts"][i] = s["class_counts"]
        cols["left"][i] = walk(s["left"], dep + 1)
        cols["right"][i] = walk(s["right"], dep + 1)
        return i

    walk(doc["tree"], 0)
    counts = np.array(cols["counts"], dtype=int).reshape(-1, 2)
    n = counts.sum(axis=1)
    imp = _gini(counts[:, 1], n)
    tree = Tree(np.array(cols["feature"]), np.array(cols["threshold"], dtype=float),
                np.array(cols["left"]), np.array(cols["right"]), np.array(cols["depth"]),
                counts, imp, np.zeros(len(n)), len(names))
    # split gains are recoverable from the stored counts
    for i in np.flatnonzero(tree.feature >= 0):
        l, r = tree.left[i], tree.right[i]
        tree.gain[i] = imp[i] - (n[l] * imp[l] + n[r] * imp[r]) / n[i]
    return tree, names


def model_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


# -- forest -------------------------------------------------------------------


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: str | int | None = "sqrt"
    bootstrap: bool = True
    tree: TreeParams = field(default_factory=TreeParams)


@dataclass(eq=False)
class ForestModel:
    trees: list[Tree]
    seeds: list[int]
    feature_names: tuple[str, ...]
    params: ForestParams


def _resolve_max_features(spec, d: int) -> int | None:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, math.ceil(math.sqrt(d)))
    return max(1, min(int(spec), d))


def fit_forest(train: Dataset, params: ForestParams = ForestParams(), seed: int = 0) -> ForestModel:
    """Bagged CART trees with per-split feature subsampling.

    Tree ``t`` uses sub-seed ``derive_seed(seed, t)`` for both its bootstrap
    draw and its feature subsets.
    """
    if len(train) == 0:
        raise ValueError("empty training set")
    d = train.X.shape[1]
    m = _resolve_max_features(params.max_features, d)
    y = np.asarray(train.y, dtype=bool)
    trees, seeds = [], []
    for t in range(params.n_trees):
        s = derive_seed(seed, t)
        rng = np.random.default_rng(s)
        if params.bootstrap:
            idx = rng.integers(0, len(y), size=len(y))
            Xb, yb = train.X[idx], y[idx]
        else:
            Xb, yb = train.X, y
        trees.append(_grow(Xb, yb, params.tree, m, rng))
        seeds.append(s)
    return ForestModel(trees, seeds, train.feature_names, params)


def forest_predict_scores(forest: ForestModel, X: np.ndarray) -> np.ndarray:
    """Fraction of trees voting positive (each tree votes by its leaf majority)."""
    votes = np.array([predict_scores(t, X) > 0.5 for t in forest.trees], dtype=float)
    return votes.mean(axis=0)


def tree_importances(tree: Tree) -> np.ndarray:
    """Unnormalized Gini importance: sum of (node fraction x impurity decrease) per feature."""
    n = tree.counts.sum(axis=1).astype(float)
    out = np.zeros(tree.n_features)
    splits = tree.feature >= 0
    np.add.at(out, tree.feature[splits], (n[splits] / n[0]) * tree.gain[splits])
    return out


def gini_importances(forest: ForestModel) -> dict[str, float]:
    """Mean over trees of per-feature Gini importance, normalized to sum to 1."""
    total = np.mean([tree_importances(t) for t in forest.trees], axis=0)
    s = total.sum()
    if s > 0:
        total = total / s
    return dict(zip(forest.feature_names, total.tolist()))


def select_fs(importances: Mapping[str, float]) -> list[str]:
    """Features whose importance is strictly above the mean importance.

    If none is (all equal), every maximal feature is kept and a
    :class:`FallbackSelectionWarning` is emitted. Order follows ``importances``.
    """
    if not importances:
        raise ValueError("empty importance map")
    vals = np.array(list(importances.values()), dtype=float)
    mean = vals.mean()
    keep = [k for k, v in importances.items() if v > mean]
    if not keep:
        top = vals.max()
        keep = [k for k, v in importances.items() if v == top]
        warnings.warn("no importance exceeds the mean; keeping all maximal features",
                      FallbackSelectionWarning, stacklevel=2)
    return keep


# -- metrics ------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auroc: float  # nan when only one class is present
    tp: int
    fp: int
    tn: int
    fn: int

    def row(self) -> tuple[float, ...]:
        return (self.accuracy, self.precision, self.recall, self.f1, self.auroc)


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """P(score of random positive > score of random negative), ties counted 1/2.

    Computed from midranks (Mann-Whitney U).
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassAUROC("AUROC needs both classes")
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    ranks = np.empty(len(s))
    # midranks over runs of equal scores
    bounds = np.flatnonzero(np.diff(ss)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [len(s)]])
    mid = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(mid, ends - starts)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def compute_metrics(scores: Sequence[float], y_true: Sequence[bool],
                    y_pred: Sequence[bool] | None = None, threshold: float = 0.5) -> MetricsReport:
    """Label metrics at ``score >= threshold`` plus AUROC.

    Precision, recall and F1 are 0 when their denominator is 0. AUROC is
    ``nan`` if ``y_true`` holds a single class.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(y_true, dtype=bool)
    if len(t) == 0:
        raise ValueError("no predictions")
    p = s >= threshold if y_pred is None else np.asarray(y_pred, dtype=bool)
    tp = int((p & t).sum())
    fp = int((p & ~t).sum())
    tn = int((~p & ~t).sum())
    fn = int((~p & t).sum())
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    try:
        auc = auroc(s, t)
    except SingleClassAUROC:
        logger.warning("AUROC undefined: single class in y_true")
        auc = float("nan")
    return MetricsReport((tp + tn) / len(t), prec, rec, f1, auc, tp, fp, tn, fn)
