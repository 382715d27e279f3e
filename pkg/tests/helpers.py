"""Independent oracles and small builders shared by the tests."""

import numpy as np

from fairgfe.data_io import Column, Dataset, Schema
from fairgfe.tree_model.tree import LEAF, DecisionTree


def kkt_projection(y, Z):
    """Closest point to y with Z^T v = 0, from the KKT system

        [ I    Z ] [v]   [y]
        [ Z^T  0 ] [l] = [0]

    solved by least squares so rank-deficient Z is tolerated.
    """
    y = np.asarray(y, float)
    Z = np.asarray(Z, float).reshape(len(y), -1)
    if Z.any():
        Z = Z / np.max(np.abs(Z))  # {Z^T v = 0} is scale invariant; lstsq's cutoff is not
    L, C = Z.shape
    K = np.block([[np.eye(L), Z], [Z.T, np.zeros((C, C))]])
    sol, *_ = np.linalg.lstsq(K, np.concatenate([y, np.zeros(C)]), rcond=None)
    return sol[:L]


def interval_tree(thresholds, values, feature_names=("x",)):
    """Balanced tree on feature 0 splitting at sorted `thresholds`.

    Leaf j covers (thresholds[j-1], thresholds[j]] and carries values[j].
    """
    thresholds = list(thresholds)
    assert len(values) == len(thresholds) + 1
    feature, threshold, left, right, leaf = [], [], [], [], []

    def node():
        for a in (feature, left, right, leaf):
            a.append(LEAF)
        threshold.append(0.0)
        return len(feature) - 1

    root = node()
    stack = [(root, 0, len(thresholds))]  # leaves lo..hi inclusive
    while stack:
        i, lo, hi = stack.pop()
        if lo == hi:
            leaf[i] = lo
            continue
        mid = (lo + hi) // 2
        l, r = node(), node()
        feature[i], threshold[i], left[i], right[i] = 0, thresholds[mid], l, r
        stack.append((l, lo, mid))
        stack.append((r, mid + 1, hi))
    return DecisionTree(feature, threshold, left, right, leaf, values, feature_names)


def leaf_dataset(leaf_positions, groups=None):
    """Dataset whose single feature x routes row i to leaf leaf_positions[i]
    of an interval_tree with thresholds 0.5, 1.5, ...; optional group labels."""
    cols = [Column("x", "numeric", "feature"), Column("y", "numeric", "target")]
    data = {"x": [float(p) for p in leaf_positions], "y": [0.0] * len(leaf_positions)}
    if groups is not None:
        cols.append(Column("g", "categorical", "group-only"))
        data["g"] = list(groups)
    return Dataset.from_columns(Schema(tuple(cols)), data)


def group_spec(name, col, value):
    return {"name": name, "all": [{"col": col, "op": "equals", "value": value}]}
