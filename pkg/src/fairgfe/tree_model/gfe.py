"""Post-training enforcement of group mean equality on tree ensembles.

Each tree's leaves are treated as independent units, so enforcing the
constraints amounts to the minimum-norm projection of the leaf-value vector
onto the null space of the tree's constraint matrix. Runtime is
O(n * depth + L * C^2) per tree for n binding rows, L leaves and C
constraints.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import linalg_core
from ..data_io import Dataset, rmse
from ..errors import SmallGroupWarning
from ..groups import BoundConstraints, ConstraintSet, bind, constraint_matrix_from_leaves
from .tree import Ensemble

MODES = ("per_tree", "joint")


@dataclass
class GroupSummary:
    name: str
    support: int
    missing_excluded: int
    mean_before: float
    mean_after: float


@dataclass
class ConstraintSummary:
    a: str
    b: str
    gap_before: float
    gap_after: float


@dataclass
class GfeReport:
    mode: str
    weighted: bool
    sigma_n_sq: float
    groups: list[GroupSummary]
    constraints: list[ConstraintSummary]
    tree_perturbation_norms: list[float]
    effective_ranks: list[int]
    total_perturbation_norm: float
    target_scale: float
    rmse_before: float | None = None
    rmse_after: float | None = None
    holdout_groups: list[GroupSummary] | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def max_gap_after(self) -> float:
        return max((abs(c.gap_after) for c in self.constraints), default=0.0)

    @property
    def max_gap_before(self) -> float:
        return max((abs(c.gap_before) for c in self.constraints), default=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["max_gap_before"] = self.max_gap_before
        d["max_gap_after"] = self.max_gap_after
        return d


def _group_means(pred_before, pred_after, bound: BoundConstraints) -> list[GroupSummary]:
    out = []
    for name, rows in bound.rows.items():
        if rows.size:
            before, after = float(pred_before[rows].mean()), float(pred_after[rows].mean())
        else:
            before = after = float("nan")
        out.append(GroupSummary(name, int(rows.size), bound.missing[name], before, after))
    return out


def _weighted_project(values, Z, weights, sv_cutoff):
    """Minimise ``sum w_j (v_j - y_j)^2`` subject to ``Z^T v = 0``."""
    if weights is None:
        return linalg_core.project_onto_nullspace(values, Z, sv_cutoff)
    root = np.sqrt(weights)
    res = linalg_core.project_onto_nullspace(values * root, Z / root[:, None], sv_cutoff)
    v = res.perturbed_values / root
    return linalg_core.ProjectionResult(
        perturbed_values=v,
        residual_norms=np.abs(Z.T @ v),
        effective_rank=res.effective_rank,
        perturbation_norm=float(np.linalg.norm(v - values)),
        singular_values=res.singular_values,
    )


def _leaf_weights(leaves: np.ndarray, n_leaves: int) -> np.ndarray:
    counts = np.bincount(leaves, minlength=n_leaves).astype(float)
    # empty leaves have zero constraint rows, so their weight is irrelevant
    counts[counts == 0] = 1.0
    return counts


def apply_gfe(
    ensemble: Ensemble,
    dataset: Dataset,
    cs: ConstraintSet,
    mode: str = "per_tree",
    weighted: bool = False,
    sigma_n_sq: float = 0.0,
    sv_cutoff: float | None = None,
    allow_empty: bool = False,
    holdout: Dataset | None = None,
) -> tuple[Ensemble, GfeReport]:
    """Return a copy of `ensemble` whose group means on `dataset` satisfy `cs`.

    Parameters
    ----------
    mode
        ``"per_tree"`` projects every tree under its own constraint matrix,
        so each tree (and therefore any linear aggregate) is fair on its own.
        ``"joint"`` stacks all leaves, scales each tree's block by its
        aggregation weight, and projects once; only the ensemble output is
        constrained, with smaller total perturbation.
    weighted
        Measure perturbation with per-leaf row counts of `dataset` instead of
        treating every leaf equally.
    sigma_n_sq
        Leaf noise variance; projected values are shrunk by ``1/(1+sigma_n_sq)``.
    allow_empty
        Turn empty-group errors into notes with inactive constraints.
    holdout
        Optional held-out data for RMSE and informational group means.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not np.isfinite(sigma_n_sq) or sigma_n_sq < 0:
        raise ValueError(f"sigma_n_sq must be a finite non-negative number, got {sigma_n_sq}")
    bound = bind(cs, dataset, allow_empty=allow_empty)
    X = dataset.features(ensemble.feature_names)
    leaves = ensemble.leaf_matrix(X)
    shrink = 1.0 / (1.0 + sigma_n_sq)

    if not len(cs):
        new_values = [t.leaf_values.copy() for t in ensemble.trees]
        norms = [0.0] * len(ensemble.trees)
        ranks = [0] * (len(ensemble.trees) if mode == "per_tree" else 1)
        if sigma_n_sq:
            new_values = [v * shrink for v in new_values]
            norms = [float(np.linalg.norm(v - t.leaf_values)) for v, t in zip(new_values, ensemble.trees)]
    elif mode == "per_tree":
        new_values, norms, ranks = [], [], []
        for t, tree in enumerate(ensemble.trees):
            Z = constraint_matrix_from_leaves(leaves[:, t], tree.n_leaves, bound)
            w = _leaf_weights(leaves[:, t], tree.n_leaves) if weighted else None
            res = _weighted_project(tree.leaf_values, Z, w, sv_cutoff)
            v = res.perturbed_values * shrink
            new_values.append(v)
            norms.append(float(np.linalg.norm(v - tree.leaf_values)))
            ranks.append(res.effective_rank)
    else:
        blocks, weights = [], []
        for t, (tree, a) in enumerate(zip(ensemble.trees, ensemble.tree_weights)):
            blocks.append(a * constraint_matrix_from_leaves(leaves[:, t], tree.n_leaves, bound))
            if weighted:
                weights.append(_leaf_weights(leaves[:, t], tree.n_leaves))
        Z = np.vstack(blocks)
        y = np.concatenate([tree.leaf_values for tree in ensemble.trees])
        res = _weighted_project(y, Z, np.concatenate(weights) if weighted else None, sv_cutoff)
        flat = res.perturbed_values * shrink
        bounds = np.cumsum([0] + [tree.n_leaves for tree in ensemble.trees])
        new_values = [flat[bounds[i]:bounds[i + 1]] for i in range(len(ensemble.trees))]
        norms = [float(np.linalg.norm(v - tree.leaf_values)) for v, tree in zip(new_values, ensemble.trees)]
        ranks = [res.effective_rank]

    fair = ensemble.with_leaf_values(new_values)
    before = ensemble.predict_from_leaves(leaves)
    after = fair.predict_from_leaves(leaves)

    constraints = []
    for c, rows_a, rows_b in bound.pairs():
        if rows_a.size and rows_b.size:
            gb = float(before[rows_a].mean() - before[rows_b].mean())
            ga = float(after[rows_a].mean() - after[rows_b].mean())
        else:
            gb = ga = 0.0
        constraints.append(ConstraintSummary(c.group_a, c.group_b, gb, ga))

    report = GfeReport(
        mode=mode,
        weighted=weighted,
        sigma_n_sq=float(sigma_n_sq),
        groups=_group_means(before, after, bound),
        constraints=constraints,
        tree_perturbation_norms=norms,
        effective_ranks=ranks,
        total_perturbation_norm=float(np.sqrt(np.sum(np.square(norms)))),
        target_scale=float(np.max(np.abs(before))) if before.size else 0.0,
        notes=list(bound.notes),
    )
    if holdout is not None and holdout.n_rows:
        Xh = holdout.features(ensemble.feature_names)
        lh = ensemble.leaf_matrix(Xh)
        hb, ha = ensemble.predict_from_leaves(lh), fair.predict_from_leaves(lh)
        yt = holdout.target()
        ok = np.isfinite(yt)
        if ok.any():
            report.rmse_before = rmse(hb[ok], yt[ok])
            report.rmse_after = rmse(ha[ok], yt[ok])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SmallGroupWarning)
            hbound = bind(cs, holdout, allow_empty=True, small_group=0)
        report.holdout_groups = _group_means(hb, ha, hbound)
    return fair, report
