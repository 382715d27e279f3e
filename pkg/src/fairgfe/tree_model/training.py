"""Baseline CART, random-forest and gradient-boosting trainers.

These exist to produce models for the post-processing step; they are plain
variance-reduction learners with no attempt at speed beyond numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .tree import LEAF, DecisionTree, Ensemble


@dataclass(frozen=True)
class CartParams:
    max_depth: int | None = 8
    min_leaf: int = 1
    feature_subsample: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if not 0.0 < self.feature_subsample <= 1.0:
            raise ValueError("feature_subsample must lie in (0, 1]")


def _check_inputs(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise DataError("cannot train on an empty dataset")
    if y.shape != (X.shape[0],):
        raise DataError(f"targets must have shape ({X.shape[0]},), got {y.shape}")
    bad = ~np.isfinite(y)
    if bad.any():
        raise DataError("non-finite target", row=int(np.argmax(bad)))
    bad = ~np.isfinite(X)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError("missing or non-finite feature value", row=int(r), column=int(c))
    return X, y


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best threshold on one feature; returns (score, threshold) or None.

    `score` is ``S_l^2/n_l + S_r^2/n_r`` on centred targets, which grows as
    the summed squared error of the split shrinks.
    """
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cs = np.cumsum(y[order])
    n_left = np.arange(1, n)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    s_left = cs[:-1]
    s_right = cs[-1] - s_left
    score = np.where(valid, s_left**2 / n_left + s_right**2 / (n - n_left), -np.inf)
    i = int(np.argmax(score))
    lo, hi = xs[i], xs[i + 1]
    mid = lo + (hi - lo) / 2
    threshold = mid if lo <= mid < hi else lo
    return float(score[i]), float(threshold)


def fit_tree_matrix(X, y, params: CartParams, feature_names, rng=None) -> DecisionTree:
    X, y = _check_inputs(X, y)
    if len(feature_names) != X.shape[1]:
        raise DataError(f"{X.shape[1]} feature columns but {len(feature_names)} names")
    rng = np.random.default_rng(params.rng_seed) if rng is None else rng
    n_features = X.shape[1]
    n_try = max(1, int(round(params.feature_subsample * n_features)))

    feature, threshold, left, right, leaf, values = [], [], [], [], [], []

    def new_node():
        for arr in (feature, left, right, leaf):
            arr.append(LEAF)
        threshold.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, rows, depth = stack.pop()
        yr = y[rows]
        split = None
        can_split = (
            (params.max_depth is None or depth < params.max_depth)
            and rows.size >= 2 * params.min_leaf
            and yr.max() > yr.min()
        )
        if can_split:
            centred = yr - yr.mean()
            best = None
            cand = np.arange(n_features) if n_try == n_features else np.sort(
                rng.choice(n_features, n_try, replace=False))
            for f in cand:
                found = _best_split(X[rows, f], centred, params.min_leaf)
                if found is not None and (best is None or found[0] > best[0]):
                    best = (found[0], f, found[1])
            # with centred targets the score equals the SSE reduction
            if best is not None and best[0] > 1e-12 * float(centred @ centred):
                split = best
        if split is None:
            leaf[node] = len(values)
            values.append(float(yr.mean()))
            continue
        _, f, t = split
        go_left = X[rows, f] <= t
        l, r = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = int(f), t, l, r
        stack.append((r, rows[~go_left], depth + 1))
        stack.append((l, rows[go_left], depth + 1))

    return DecisionTree(feature, threshold, left, right, leaf, values, tuple(feature_names))


def train_cart(dataset, targets=None, params: CartParams | None = None) -> DecisionTree:
    """Greedy variance-reduction tree; leaf value is the mean target in the leaf.

    `dataset` may be a :class:`~fairgfe.data_io.Dataset` (features and,
    unless `targets` is given, target are taken from its schema) or a plain
    feature matrix with explicit `targets`.
    """
    params = params or CartParams()
    X, y, names = _unpack(dataset, targets)
    return fit_tree_matrix(X, y, params, names)


def _unpack(dataset, targets):
    if hasattr(dataset, "schema"):
        names = dataset.schema.feature_names
        X = dataset.features(names)
        y = dataset.target() if targets is None else targets
    else:
        X = np.asarray(dataset, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        names = [f"x{i}" for i in range(X.shape[1])]
        y = targets
    if y is None:
        raise DataError("targets required")
    return X, np.asarray(y, dtype=float), names


def train_forest(dataset, targets=None, n_trees: int = 50, bootstrap: bool = True,
                 params: CartParams | None = None) -> Ensemble:
    """Random forest with mean aggregation; per-tree seeds derive from ``params.rng_seed``."""
    params = params or CartParams()
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X, y, names = _unpack(dataset, targets)
    X, y = _check_inputs(X, y)
    seeds = np.random.SeedSequence(params.rng_seed).spawn(n_trees)
    trees = []
    for seq in seeds:
        rng = np.random.default_rng(seq)
        if bootstrap:
            idx = rng.integers(0, X.shape[0], X.shape[0])
            trees.append(fit_tree_matrix(X[idx], y[idx], params, names, rng))
        else:
            trees.append(fit_tree_matrix(X, y, params, names, rng))
    return Ensemble(tuple(trees), "mean")


def train_boosted(dataset, targets=None, n_rounds: int = 100, learning_rate: float = 0.1,
                  params: CartParams | None = None) -> Ensemble:
    """Squared-loss gradient boosting: each round fits the current residuals.

    With ``0 < learning_rate <= 1`` training RMSE never increases between rounds.
    """
    params = params or CartParams(max_depth=3)
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must lie in (0, 1]")
    X, y, names = _unpack(dataset, targets)
    X, y = _check_inputs(X, y)
    rng = np.random.default_rng(params.rng_seed)
    base = float(y.mean())
    pred = np.full(y.shape, base)
    trees = []
    for _ in range(n_rounds):
        tree = fit_tree_matrix(X, y - pred, params, names, rng)
        pred = pred + learning_rate * tree.predict_matrix(X)
        trees.append(tree)
    return Ensemble(tuple(trees), "additive", base_score=base, learning_rate=learning_rate)
