"""Subgroup predicates and assembly of the leaf-level constraint matrix.

A group is a conjunction of atomic clauses over dataset columns. A
constraint asks that the model's mean output over group A equals its mean
over group B. On a tree, each group's rows induce an empirical distribution
over leaves, and column ``c`` of the constraint matrix is the difference of
the two distributions for constraint ``c``, so that ``Z[:, c] @ leaf_values``
is exactly the gap between the two group means.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import DEFAULTS
from .data_io import Dataset
from .errors import DataError, SmallGroupWarning

log = logging.getLogger(__name__)

_OP_ALIASES = {
    "equals": "equals", "eq": "equals", "==": "equals",
    "not-equals": "not-equals", "ne": "not-equals", "!=": "not-equals",
    "in-set": "in-set", "in": "in-set",
    "numeric-range": "numeric-range", "range": "numeric-range",
}


@dataclass(frozen=True)
class Clause:
    """One atomic test on a column.

    ``numeric-range`` takes ``(low, high)`` and matches ``low <= v < high``;
    either bound may be ``None`` for an open side.
    """

    col: str
    op: str
    value: object

    def __post_init__(self):
        op = _OP_ALIASES.get(self.op)
        if op is None:
            raise DataError(f"unknown operator {self.op!r}; expected one of {sorted(set(_OP_ALIASES.values()))}")
        object.__setattr__(self, "op", op)
        if op == "in-set":
            if isinstance(self.value, (str, bytes)) or not isinstance(self.value, Sequence):
                raise DataError("in-set expects a list of values", column=self.col)
            object.__setattr__(self, "value", tuple(self.value))
        if op == "numeric-range":
            if not isinstance(self.value, Sequence) or len(self.value) != 2:
                raise DataError("numeric-range expects [low, high]", column=self.col)
            object.__setattr__(self, "value", tuple(self.value))

    def mask(self, dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(matches, missing)`` boolean masks over all rows."""
        col = dataset.schema.column(self.col)
        data = dataset.column(self.col)
        missing = np.isnan(data)
        categorical = col.kind == "categorical"

        def encode(v):
            return dataset.code(self.col, v) if categorical else float(v)

        if self.op == "numeric-range":
            if categorical:
                raise DataError("numeric-range on a categorical column", column=self.col)
            low, high = self.value
            hit = np.ones(len(data), dtype=bool)
            if low is not None:
                hit &= data >= float(low)
            if high is not None:
                hit &= data < float(high)
        elif self.op == "in-set":
            codes = [encode(v) for v in self.value]
            hit = np.isin(data, [c for c in codes if not math.isnan(c)])
        elif self.op == "equals":
            hit = data == encode(self.value)
        else:
            hit = data != encode(self.value)
        return hit & ~missing, missing


@dataclass(frozen=True)
class GroupSpec:
    name: str
    clauses: tuple[Clause, ...] = ()

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroupSpec":
        if "name" not in d:
            raise DataError(f"group without a name: {d!r}")
        clauses = []
        for c in d.get("all", ()):
            try:
                clauses.append(Clause(c["col"], c["op"], c.get("value")))
            except KeyError as exc:
                raise DataError(f"clause in group {d['name']!r} is missing key {exc}") from None
        return cls(d["name"], tuple(clauses))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "all": [{"col": c.col, "op": c.op, "value": list(c.value) if isinstance(c.value, tuple) else c.value}
                    for c in self.clauses],
        }


@dataclass(frozen=True)
class Constraint:
    group_a: str
    group_b: str

    def __post_init__(self):
        if self.group_a == self.group_b:
            raise DataError(f"constraint compares group {self.group_a!r} with itself")


@dataclass(frozen=True)
class ConstraintSet:
    groups: tuple[GroupSpec, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        names = [g.name for g in self.groups]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DataError(f"duplicate group names: {dupes}")
        for c in self.constraints:
            for name in (c.group_a, c.group_b):
                if name not in names:
                    raise DataError(f"constraint references undefined group {name!r}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConstraintSet":
        """Parse the constraint-file layout.

        Explicit ``constraints`` come first, then each ``equalize`` list of k
        names expands to k-1 constraints against its first entry. A pair that
        repeats an earlier one (in either orientation) is dropped, since it
        spans the same constraint direction.
        """
        groups = tuple(GroupSpec.from_dict(g) for g in d.get("groups", ()))
        pairs = []
        for c in d.get("constraints", ()):
            try:
                pairs.append((c["a"], c["b"]))
            except KeyError as exc:
                raise DataError(f"constraint is missing key {exc}: {c!r}") from None
        for names in d.get("equalize", ()):
            names = list(names)
            pairs.extend((names[0], other) for other in names[1:])
        seen = set()
        constraints = []
        for a, b in pairs:
            key = frozenset((a, b))
            if key in seen:
                log.info("dropping repeated constraint %s vs %s", a, b)
                continue
            seen.add(key)
            constraints.append(Constraint(a, b))
        return cls(groups, tuple(constraints))

    @classmethod
    def load(cls, path) -> "ConstraintSet":
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid constraint JSON in {path}: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "groups": [g.to_dict() for g in self.groups],
            "constraints": [{"a": c.group_a, "b": c.group_b} for c in self.constraints],
        }

    def group(self, name: str) -> GroupSpec:
        for g in self.groups:
            if g.name == name:
                return g
        raise DataError(f"undefined group {name!r}")

    @property
    def used_groups(self) -> list[str]:
        """Names of groups referenced by a constraint, in definition order."""
        used = {name for c in self.constraints for name in (c.group_a, c.group_b)}
        return [g.name for g in self.groups if g.name in used]

    def __len__(self):
        return len(self.constraints)


def _group_masks(group: GroupSpec, dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    hit = np.ones(dataset.n_rows, dtype=bool)
    missing = np.zeros(dataset.n_rows, dtype=bool)
    for clause in group.clauses:
        m, miss = clause.mask(dataset)
        hit &= m
        missing |= miss
    return hit, missing


def evaluate_group(group: GroupSpec, dataset: Dataset) -> np.ndarray:
    """Sorted indices of rows satisfying every clause.

    Rows with a missing value in any referenced column are excluded; see
    :func:`count_missing`.
    """
    hit, _ = _group_masks(group, dataset)
    return np.flatnonzero(hit)


def count_missing(group: GroupSpec, dataset: Dataset) -> int:
    _, missing = _group_masks(group, dataset)
    return int(missing.sum())


@dataclass(frozen=True)
class LeafDistribution:
    tree_id: int
    probabilities: np.ndarray
    support_count: int


def leaf_distribution(tree, dataset: Dataset, rows, tree_id: int = 0) -> LeafDistribution:
    rows = np.asarray(rows, dtype=int)
    if rows.size == 0:
        return LeafDistribution(tree_id, np.zeros(tree.n_leaves), 0)
    leaves = tree.apply(dataset.take(rows))
    return LeafDistribution(tree_id, _occupancy(leaves, tree.n_leaves), int(rows.size))


def _occupancy(leaf_ids: np.ndarray, n_leaves: int) -> np.ndarray:
    if leaf_ids.size == 0:
        return np.zeros(n_leaves)
    return np.bincount(leaf_ids, minlength=n_leaves) / leaf_ids.size


@dataclass(frozen=True)
class BoundConstraints:
    """A constraint set evaluated against one dataset."""

    constraint_set: ConstraintSet
    rows: Mapping[str, np.ndarray]
    missing: Mapping[str, int]
    notes: tuple[str, ...] = field(default=())

    def pairs(self):
        for c in self.constraint_set.constraints:
            yield c, self.rows[c.group_a], self.rows[c.group_b]


def bind(cs: ConstraintSet, dataset: Dataset, allow_empty: bool = False,
         small_group: int | None = None) -> BoundConstraints:
    """Evaluate every referenced group once and run the support checks.

    Empty groups raise :class:`DataError` unless `allow_empty`, in which case
    they are reported and their constraints contribute zero columns. Groups
    below `small_group` rows emit :class:`SmallGroupWarning`.
    """
    small_group = DEFAULTS.small_group if small_group is None else small_group
    rows, missing, notes = {}, {}, []
    for name in cs.used_groups:
        spec = cs.group(name)
        hit, miss = _group_masks(spec, dataset)
        rows[name] = np.flatnonzero(hit)
        missing[name] = int(miss.sum())
        if missing[name]:
            notes.append(f"group {name!r}: {missing[name]} rows excluded for missing values")
        n = rows[name].size
        if n == 0:
            msg = f"group {name!r} is empty on the binding dataset"
            if not allow_empty:
                raise DataError(msg)
            notes.append(msg + "; its constraints are inactive")
            warnings.warn(msg, SmallGroupWarning, stacklevel=2)
        elif n < small_group:
            msg = f"group {name!r} has only {n} rows; its empirical distribution may be unreliable"
            notes.append(msg)
            warnings.warn(msg, SmallGroupWarning, stacklevel=2)
    return BoundConstraints(cs, rows, missing, tuple(notes))


def constraint_matrix_from_leaves(leaf_ids: np.ndarray, n_leaves: int, bound: BoundConstraints) -> np.ndarray:
    """L x C matrix from precomputed leaf assignments of every dataset row."""
    Z = np.zeros((n_leaves, len(bound.constraint_set)))
    for c, (_, rows_a, rows_b) in enumerate(bound.pairs()):
        if rows_a.size == 0 or rows_b.size == 0:
            continue
        Z[:, c] = _occupancy(leaf_ids[rows_a], n_leaves) - _occupancy(leaf_ids[rows_b], n_leaves)
    return Z


def build_constraint_matrix(tree, dataset: Dataset, cs: ConstraintSet, allow_empty: bool = False) -> np.ndarray:
    bound = cs if isinstance(cs, BoundConstraints) else bind(cs, dataset, allow_empty)
    return constraint_matrix_from_leaves(tree.apply(dataset), tree.n_leaves, bound)
