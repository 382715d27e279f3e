"""Array-backed regression trees and ensembles."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..errors import DataError, ShapeError

LEAF = -1


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Binary axis-aligned regression tree.

    Nodes are stored in parallel arrays. Internal nodes have
    ``feature >= 0`` and children ``left``/``right``; leaves have
    ``feature == -1`` and a dense ``leaf`` id indexing `leaf_values`.
    Routing sends ``x[feature] <= threshold`` left. Node 0 is the root.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray
    leaf_values: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        for name, dtype in (("feature", np.int64), ("threshold", float), ("left", np.int64),
                            ("right", np.int64), ("leaf", np.int64), ("leaf_values", float)):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        self._validate()

    def _validate(self):
        n = self.feature.size
        if n == 0:
            raise ShapeError("tree has no nodes")
        if not all(a.size == n for a in (self.threshold, self.left, self.right, self.leaf)):
            raise ShapeError("node arrays differ in length")
        internal = self.feature >= 0
        if np.any(self.feature[internal] >= len(self.feature_names)):
            raise ShapeError("split feature index out of range", expected=len(self.feature_names))
        if not np.all(np.isfinite(self.threshold[internal])):
            raise ShapeError("thresholds must be finite")
        if not np.all(np.isfinite(self.leaf_values)):
            raise ShapeError("leaf values must be finite")
        leaves = self.leaf[~internal]
        if np.any(self.leaf[internal] != LEAF):
            raise ShapeError("internal nodes must not carry leaf ids")
        if not np.array_equal(np.sort(leaves), np.arange(leaves.size)):
            raise ShapeError("leaf ids must be dense and unique", expected=f"0..{leaves.size - 1}")
        if self.leaf_values.size != leaves.size:
            raise ShapeError("one value per leaf", expected=leaves.size, got=self.leaf_values.size)
        children = np.concatenate([self.left[internal], self.right[internal]])
        if np.any((children <= 0) | (children >= n)):
            raise ShapeError("child index out of range")
        # every non-root node has exactly one parent and the root none -> a tree
        if np.bincount(children, minlength=n)[1:].tolist() != [1] * (n - 1):
            raise ShapeError("nodes must form a single binary tree")
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        while stack:
            i = stack.pop()
            if seen[i]:
                raise ShapeError("cycle in tree")
            seen[i] = True
            if internal[i]:
                stack += [int(self.left[i]), int(self.right[i])]
        if not seen.all():
            raise ShapeError("unreachable nodes in tree")

    @classmethod
    def leaf_only(cls, value: float, feature_names: Sequence[str]) -> "DecisionTree":
        return cls([LEAF], [0.0], [LEAF], [LEAF], [0], [value], tuple(feature_names))

    @property
    def n_leaves(self) -> int:
        return self.leaf_values.size

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def with_leaf_values(self, values) -> "DecisionTree":
        values = np.asarray(values, dtype=float)
        if values.shape != self.leaf_values.shape:
            raise ShapeError("replacement leaf values", expected=self.leaf_values.shape, got=values.shape)
        return replace(self, leaf_values=values)

    def apply_matrix(self, X: np.ndarray) -> np.ndarray:
        """Leaf id of each row of a feature matrix ordered like `feature_names`."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise ShapeError("feature matrix width", expected=len(self.feature_names), got=X.shape[1])
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            f = self.feature[nd]
            x = X[active, f]
            bad = np.isnan(x)
            if bad.any():
                k = int(np.argmax(bad))
                raise DataError("missing value in split feature", row=int(active[k]),
                                column=self.feature_names[f[k]])
            nxt = np.where(x <= self.threshold[nd], self.left[nd], self.right[nd])
            node[active] = nxt
            active = active[self.feature[nxt] >= 0]
        return self.leaf[node]

    def apply(self, dataset) -> np.ndarray:
        """Leaf id of each dataset row."""
        return self.apply_matrix(dataset.features(self.feature_names))

    def predict_matrix(self, X) -> np.ndarray:
        return self.leaf_values[self.apply_matrix(X)]

    def predict(self, dataset) -> np.ndarray:
        return self.leaf_values[self.apply(dataset)]


def assign_leaf(tree: DecisionTree, row) -> int:
    """Leaf id for a single feature vector (ties at the threshold go left)."""
    return int(tree.apply_matrix(np.asarray(row, dtype=float)[None, :])[0])


AGGREGATIONS = ("mean", "additive")


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Trees combined as ``base_score + sum_t weight_t * tree_t(x)``.

    ``mean`` aggregation (random forest, or a lone CART tree) uses weights
    ``1 / T`` and zero base score; ``additive`` (boosting) uses
    ``learning_rate`` for every tree.
    """

    trees: tuple[DecisionTree, ...]
    aggregation: str = "mean"
    base_score: float = 0.0
    learning_rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise ShapeError("ensemble needs at least one tree")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        names = self.trees[0].feature_names
        if any(t.feature_names != names for t in self.trees):
            raise ShapeError("all trees must share one feature schema")
        if self.aggregation == "mean" and self.base_score != 0.0:
            raise ValueError("mean aggregation has no base score")
        if not (np.isfinite(self.base_score) and np.isfinite(self.learning_rate)):
            raise ValueError("base_score and learning_rate must be finite")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.trees[0].feature_names

    @property
    def tree_weights(self) -> np.ndarray:
        T = len(self.trees)
        if self.aggregation == "mean":
            return np.full(T, 1.0 / T)
        return np.full(T, self.learning_rate)

    def with_leaf_values(self, values: Sequence) -> "Ensemble":
        return replace(self, trees=tuple(t.with_leaf_values(v) for t, v in zip(self.trees, values, strict=True)))

    def leaf_matrix(self, X) -> np.ndarray:
        """(n_rows, n_trees) leaf ids."""
        return np.column_stack([t.apply_matrix(X) for t in self.trees])

    def predict_from_leaves(self, leaves: np.ndarray) -> np.ndarray:
        out = np.zeros(leaves.shape[0])
        if self.aggregation == "mean":
            for t, tree in enumerate(self.trees):
                out += tree.leaf_values[leaves[:, t]]
            return out / len(self.trees)
        for t, tree in enumerate(self.trees):
            out += tree.leaf_values[leaves[:, t]]
        return self.base_score + self.learning_rate * out

    def predict_matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return self.predict_from_leaves(self.leaf_matrix(X))

    def predict(self, dataset) -> np.ndarray:
        return self.predict_matrix(dataset.features(self.feature_names))


def predict(ensemble: Ensemble, row) -> float:
    """Prediction for a single feature vector."""
    return float(ensemble.predict_matrix(np.asarray(row, dtype=float))[0])
