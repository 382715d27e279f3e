"""Model JSON format (``format_version`` 1).

Floats are written with Python's shortest round-trip ``repr``, so a
save/load cycle reproduces every threshold and leaf value bit for bit.
See ``docs/model_format.md`` for the layout.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import DataError, GfeError
from .tree import LEAF, DecisionTree, Ensemble

FORMAT_VERSION = 1


def _tree_to_dict(tree: DecisionTree) -> dict:
    nodes = []
    for i in range(tree.n_nodes):
        f = int(tree.feature[i])
        if f == LEAF:
            leaf = int(tree.leaf[i])
            nodes.append({"leaf": leaf, "value": float(tree.leaf_values[leaf])})
        else:
            nodes.append({
                "feature": f,
                "threshold": float(tree.threshold[i]),
                "left": int(tree.left[i]),
                "right": int(tree.right[i]),
            })
    return {"nodes": nodes}


def ensemble_to_dict(ensemble: Ensemble) -> dict:
    agg = {"kind": ensemble.aggregation}
    if ensemble.aggregation == "additive":
        agg["base_score"] = float(ensemble.base_score)
        agg["learning_rate"] = float(ensemble.learning_rate)
    return {
        "format_version": FORMAT_VERSION,
        "schema": list(ensemble.feature_names),
        "aggregation": agg,
        "trees": [_tree_to_dict(t) for t in ensemble.trees],
    }


def _tree_from_dict(d: dict, names) -> DecisionTree:
    feature, threshold, left, right, leaf = [], [], [], [], []
    values = {}
    for node in d["nodes"]:
        if "leaf" in node:
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            leaf.append(int(node["leaf"]))
            values[int(node["leaf"])] = float(node["value"])
        else:
            feature.append(int(node["feature"]))
            threshold.append(float(node["threshold"]))
            left.append(int(node["left"]))
            right.append(int(node["right"]))
            leaf.append(LEAF)
    leaf_values = [values[k] for k in sorted(values)]
    return DecisionTree(feature, threshold, left, right, leaf, leaf_values, names)


def ensemble_from_dict(d: dict) -> Ensemble:
    if d.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format_version {d.get('format_version')!r}")
    try:
        names = tuple(d["schema"])
        agg = d["aggregation"]
        trees = tuple(_tree_from_dict(t, names) for t in d["trees"])
        return Ensemble(
            trees,
            agg["kind"],
            base_score=float(agg.get("base_score", 0.0)),
            learning_rate=float(agg.get("learning_rate", 1.0)),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed model file: missing or invalid {exc}") from None
    except (GfeError, ValueError) as exc:
        raise DataError(f"malformed model file: {exc}") from None


def dumps(ensemble: Ensemble) -> str:
    return json.dumps(ensemble_to_dict(ensemble), indent=1) + "\n"


def save_model(ensemble: Ensemble, path) -> None:
    Path(path).write_text(dumps(ensemble), encoding="utf-8")


def load_model(path) -> Ensemble:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid model JSON in {path}: {exc.msg}", line=exc.lineno) from None
    return ensemble_from_dict(d)
