"""CART trees and bagged random forests with impurity-decrease importance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, NonFinite, TooFewRows
from .featurize import FeatureMatrix

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass
class TreeNode:
    """Internal node when ``feature`` is set, leaf otherwise.

    Leaves store ``value`` (regression mean) or ``counts`` (class histogram in
    model class order). ``n_samples`` and ``impurity`` are kept on every node
    for importance accounting.
    """

    n_samples: int
    impurity: float
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: Optional[float] = None
    counts: Optional[Tuple[int, ...]] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            d = {"n": self.n_samples, "impurity": self.impurity}
            if self.counts is not None:
                d["counts"] = list(self.counts)
            else:
                d["value"] = self.value
            return d
        return {
            "n": self.n_samples,
            "impurity": self.impurity,
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "feature" in d:
            return cls(d["n"], d["impurity"], d["feature"], d["threshold"],
                       cls.from_dict(d["left"]), cls.from_dict(d["right"]))
        counts = tuple(d["counts"]) if "counts" in d else None
        return cls(d["n"], d["impurity"], value=d.get("value"), counts=counts)


def gini(counts: Sequence[float]) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p * p).sum())


def variance_impurity(y: Sequence[float]) -> float:
    y = np.asarray(y, dtype=float)
    return float(((y - y.mean()) ** 2).mean()) if len(y) else 0.0


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: Optional[int] = None  # None -> ceil(sqrt(d)) / ceil(d/3)
    min_samples_leaf: int = 1
    max_depth: Optional[int] = None
    bootstrap: bool = True

    def resolve_max_features(self, d: int, task: str) -> int:
        if self.max_features is not None:
            return max(1, min(int(self.max_features), d))
        if task == CLASSIFICATION:
            return max(1, math.ceil(math.sqrt(d)))
        return max(1, math.ceil(d / 3))


@dataclass(frozen=True)
class RFModel:
    trees: Tuple[TreeNode, ...]
    task: str
    params: ForestParams
    seed: int
    feature_names: Tuple[str, ...]
    classes: Tuple[str, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "kind": "random_forest",
            "task": self.task,
            "params": {
                "n_trees": self.params.n_trees,
                "max_features": self.params.max_features,
                "min_samples_leaf": self.params.min_samples_leaf,
                "max_depth": self.params.max_depth,
                "bootstrap": self.params.bootstrap,
            },
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "classes": list(self.classes),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RFModel":
        return cls(
            tuple(TreeNode.from_dict(t) for t in d["trees"]), d["task"], ForestParams(**d["params"]),
            d["seed"], tuple(d["feature_names"]), tuple(d["classes"]),
        )


# -- split search -----------------------------------------------------------


def best_split(X: np.ndarray, y: np.ndarray, features: Sequence[int], task: str,
               n_classes: int = 0, min_samples_leaf: int = 1):
    """Lowest weighted child impurity over ``features`` at midpoint thresholds.

    ``y`` holds floats (regression) or class indices (classification).
    Returns ``(feature, threshold, weighted_impurity)`` or ``None`` when no
    candidate split leaves ``min_samples_leaf`` rows on both sides. Ties go to
    the earlier feature in ``features`` and then the lower threshold.
    """
    n = X.shape[0]
    if n < 2 * min_samples_leaf:
        return None
    features = np.asarray(features, dtype=int)
    sub = X[:, features]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    left_n = np.arange(1, n)[:, None].astype(float)
    right_n = n - left_n

    if task == REGRESSION:
        ys = y[order]
        csum = np.cumsum(ys, axis=0)
        csq = np.cumsum(ys * ys, axis=0)
        tot, tot_sq = csum[-1], csq[-1]
        l_sum, l_sq = csum[:-1], csq[:-1]
        r_sum, r_sq = tot - l_sum, tot_sq - l_sq
        # n_l*var_l + n_r*var_r = SSE_l + SSE_r
        sse = (l_sq - l_sum ** 2 / left_n) + (r_sq - r_sum ** 2 / right_n)
        score = np.maximum(sse, 0.0) / n
    else:
        onehot = np.eye(n_classes)[y]  # (n, K)
        oh = onehot[order]  # (n, F, K)
        lc = np.cumsum(oh, axis=0)[:-1]
        rc = oh.sum(axis=0)[None] - lc
        l_g = left_n - (lc ** 2).sum(axis=2) / left_n
        r_g = right_n - (rc ** 2).sum(axis=2) / right_n
        score = (l_g + r_g) / n  # = (n_l*gini_l + n_r*gini_r)/n

    valid = xs[1:] > xs[:-1]
    if min_samples_leaf > 1:
        pos = np.arange(1, n)[:, None]
        valid &= (pos >= min_samples_leaf) & (n - pos >= min_samples_leaf)
    if not valid.any():
        return None
    score = np.where(valid, score, np.inf)
    # column-major flattening so the earliest feature wins ties
    flat = int(np.argmin(score.T.ravel()))
    f_pos, row = divmod(flat, n - 1)
    threshold = 0.5 * (xs[row, f_pos] + xs[row + 1, f_pos])
    if not threshold < xs[row + 1, f_pos]:
        threshold = xs[row, f_pos]  # adjacent floats: midpoint rounds up onto the right value
    return int(features[f_pos]), float(threshold), float(score[row, f_pos])


def _grow(X, y, idx, task, n_classes, max_features, params, rng, depth) -> TreeNode:
    yi = y[idx]
    n = len(idx)
    if task == REGRESSION:
        impurity = variance_impurity(yi)
        counts = None
    else:
        counts = np.bincount(yi, minlength=n_classes)
        impurity = gini(counts)

    def leaf():
        if task == REGRESSION:
            value = yi[0] if np.ptp(yi) == 0 else yi.mean()
            return TreeNode(n, impurity, value=float(value))
        return TreeNode(n, impurity, counts=tuple(int(c) for c in counts))

    pure = np.ptp(yi) == 0 if task == REGRESSION else impurity <= 0.0
    if pure or n < 2 * params.min_samples_leaf:
        return leaf()
    if params.max_depth is not None and depth >= params.max_depth:
        return leaf()

    Xi = X[idx]
    perm = rng.permutation(X.shape[1])
    # constant columns carry no split; skip them without spending the budget
    varying = perm[Xi[:, perm].max(axis=0) > Xi[:, perm].min(axis=0)]
    if len(varying) == 0:
        return leaf()
    split = best_split(Xi, yi, varying[:max_features], task, n_classes, params.min_samples_leaf)
    if split is None:
        return leaf()
    feature, threshold, _ = split
    go_left = Xi[:, feature] <= threshold
    node = TreeNode(n, impurity, feature=feature, threshold=threshold)
    node.left = _grow(X, y, idx[go_left], task, n_classes, max_features, params, rng, depth + 1)
    node.right = _grow(X, y, idx[~go_left], task, n_classes, max_features, params, rng, depth + 1)
    return node


def _as_array(X) -> Tuple[np.ndarray, Tuple[str, ...]]:
    if isinstance(X, FeatureMatrix):
        return X.values, X.column_names
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("expected a 2-D feature matrix")
    return X, tuple(f"x{j}" for j in range(X.shape[1]))


def train_random_forest(
    X: Union[FeatureMatrix, np.ndarray],
    y: Sequence,
    params: ForestParams = ForestParams(),
    seed: int = 0,
    task: Optional[str] = None,
) -> RFModel:
    """Grow ``params.n_trees`` CART trees.

    The task is inferred from ``y`` (strings -> classification) unless given.
    Tree ``t`` draws from its own stream seeded by ``(seed, t)``.
    """
    Xv, names = _as_array(X)
    n, d = Xv.shape
    if n < 2:
        raise TooFewRows(f"random forest needs at least 2 rows, got {n}")
    if len(y) != n:
        raise DimensionMismatch(f"{n} rows but {len(y)} targets")
    if not np.all(np.isfinite(Xv)):
        raise NonFinite("feature matrix contains non-finite values")
    if task is None:
        task = CLASSIFICATION if any(isinstance(v, str) for v in y) else REGRESSION
    if task == CLASSIFICATION:
        classes = tuple(sorted({str(v) for v in y}))
        lookup = {c: k for k, c in enumerate(classes)}
        yv = np.array([lookup[str(v)] for v in y], dtype=int)
    else:
        classes = ()
        yv = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(yv)):
            raise NonFinite("targets contain non-finite values")
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    max_features = params.resolve_max_features(d, task)

    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng([seed, t])
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(_grow(Xv, yv, idx, task, len(classes), max_features, params, rng, 0))
    return RFModel(tuple(trees), task, params, seed, names, classes)


def _leaf_for(node: TreeNode, x: np.ndarray) -> TreeNode:
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


def tree_predict(tree: TreeNode, X: np.ndarray, task: str):
    """Per-row leaf output: value, or the winning class index."""
    out = []
    for x in X:
        leaf = _leaf_for(tree, x)
        out.append(leaf.value if task == REGRESSION else int(np.argmax(leaf.counts)))
    return np.asarray(out)


def rf_predict(model: RFModel, X: Union[FeatureMatrix, np.ndarray]):
    Xv, _ = _as_array(X)
    if Xv.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} features, got {Xv.shape[1]}")
    outputs = np.array([tree_predict(t, Xv, model.task) for t in model.trees])
    if model.task == REGRESSION:
        return outputs.mean(axis=0)
    k = len(model.classes)
    votes = np.array([np.bincount(col, minlength=k) for col in outputs.T.astype(int)])
    return [model.classes[c] for c in np.argmax(votes, axis=1)]


def _tree_decrease(node: TreeNode, total: int, acc: np.ndarray) -> None:
    if node.is_leaf:
        return
    l, r = node.left, node.right
    acc[node.feature] += (
        node.n_samples * node.impurity - l.n_samples * l.impurity - r.n_samples * r.impurity
    ) / total
    _tree_decrease(l, total, acc)
    _tree_decrease(r, total, acc)


def rf_feature_importance(model: RFModel) -> np.ndarray:
    """Mean decrease in impurity, averaged over trees, normalized to sum 1."""
    acc = np.zeros(model.n_features)
    for tree in model.trees:
        per_tree = np.zeros(model.n_features)
        _tree_decrease(tree, tree.n_samples, per_tree)
        acc += per_tree
    acc /= len(model.trees)
    acc = np.maximum(acc, 0.0)
    total = acc.sum()
    return acc / total if total > 0 else acc
