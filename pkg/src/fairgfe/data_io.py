"""CSV ingestion, schema typing and train/test splitting.

All columns are held in one float matrix. Categorical columns store dense
integer codes (order of first appearance) and keep their string dictionary
alongside; missing cells are NaN in both kinds.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

KINDS = ("numeric", "categorical")
ROLES = ("feature", "target", "group-only", "ignore")
MISSING_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "null"})


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = "numeric"
    role: str = "feature"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown column kind {self.kind!r}; expected one of {KINDS}", column=self.name)
        if self.role not in ROLES:
            raise DataError(f"unknown column role {self.role!r}; expected one of {ROLES}", column=self.name)


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DataError(f"duplicate column names in schema: {dupes}")

    @classmethod
    def from_config(cls, config: Mapping) -> "Schema":
        """Build from ``{"columns": [{"name": ..., "kind": ..., "role": ...}]}``."""
        try:
            entries = config["columns"]
        except (KeyError, TypeError):
            raise DataError('schema config must be an object with a "columns" list') from None
        cols = []
        for entry in entries:
            if "name" not in entry:
                raise DataError(f"schema column without a name: {entry!r}")
            cols.append(Column(entry["name"], entry.get("kind", "numeric"), entry.get("role", "feature")))
        return cls(tuple(cols))

    @classmethod
    def load(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            try:
                config = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid schema JSON in {path}: {exc.msg}", line=exc.lineno) from None
        return cls.from_config(config)

    def to_config(self) -> dict:
        return {"columns": [{"name": c.name, "kind": c.kind, "role": c.role} for c in self.columns]}

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise DataError("unknown column", column=name)

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise DataError("unknown column", column=name)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns if c.role == "feature"]

    @property
    def target_name(self) -> str:
        targets = [c.name for c in self.columns if c.role == "target"]
        if len(targets) != 1:
            raise DataError(f"schema must declare exactly one target column, found {len(targets)}")
        return targets[0]


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    values: np.ndarray
    categories: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.schema.columns):
            raise DataError(
                f"values must be (n_rows, {len(self.schema.columns)}), got {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_columns(cls, schema: Schema, data: Mapping[str, Sequence]) -> "Dataset":
        """Build from in-memory columns; categorical columns take raw labels."""
        n = None
        arrays = []
        categories = {}
        for col in schema.columns:
            if col.name not in data:
                raise DataError("column missing from data", column=col.name)
            raw = list(data[col.name])
            if n is None:
                n = len(raw)
            elif len(raw) != n:
                raise DataError(f"column length {len(raw)} differs from {n}", column=col.name)
            if col.kind == "categorical":
                codes, labels = _encode(raw)
                arrays.append(codes)
                categories[col.name] = labels
            else:
                arrays.append(np.array([np.nan if v is None else v for v in raw], dtype=float))
        values = np.column_stack(arrays) if arrays else np.zeros((0, 0))
        return cls(schema, values, categories)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n_rows

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index(name)]

    def features(self, names: Sequence[str] | None = None) -> np.ndarray:
        """Feature matrix with columns in `names` order (defaults to the schema's features)."""
        names = self.schema.feature_names if names is None else list(names)
        idx = [self.schema.index(n) for n in names]
        return self.values[:, idx]

    def target(self) -> np.ndarray:
        return self.column(self.schema.target_name)

    def code(self, name: str, label) -> float:
        """Integer code of a categorical label, or NaN when the label never occurs."""
        labels = self.categories.get(name)
        if labels is None:
            raise DataError("column is not categorical", column=name)
        label = _label(label)
        try:
            return float(labels.index(label))
        except ValueError:
            return math.nan

    def decode(self, name: str, codes) -> list:
        labels = self.categories[name]
        return [None if np.isnan(c) else labels[int(c)] for c in np.atleast_1d(codes)]

    def take(self, rows) -> "Dataset":
        return Dataset(self.schema, self.values[np.asarray(rows, dtype=int)], self.categories)


def _label(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _encode(raw: Iterable) -> tuple[np.ndarray, tuple[str, ...]]:
    lookup: dict[str, int] = {}
    codes = []
    for v in raw:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            codes.append(np.nan)
            continue
        key = _label(v)
        codes.append(lookup.setdefault(key, len(lookup)))
    return np.array(codes, dtype=float), tuple(lookup)


def load_csv(path, schema_config) -> Dataset:
    """Read an RFC-4180 CSV with a header row.

    `schema_config` is a :class:`Schema`, a config mapping, or a path to a
    schema JSON file. Every header must be described by the schema and every
    schema column must appear in the header.
    """
    if isinstance(schema_config, Schema):
        schema = schema_config
    elif isinstance(schema_config, Mapping):
        schema = Schema.from_config(schema_config)
    else:
        schema = Schema.load(schema_config)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty; a header row is required", line=1) from None
        known = set(schema.names)
        for name in header:
            if name not in known:
                raise DataError("header not described by schema", line=1, column=name)
        positions = {}
        for col in schema.columns:
            if col.name not in header:
                raise DataError("schema column absent from CSV header", line=1, column=col.name)
            positions[col.name] = header.index(col.name)

        raw: dict[str, list] = {c.name: [] for c in schema.columns}
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, found {len(row)}", line=line)
            for col in schema.columns:
                cell = row[positions[col.name]].strip()
                if cell in MISSING_TOKENS:
                    raw[col.name].append(None)
                elif col.kind == "numeric":
                    try:
                        raw[col.name].append(float(cell))
                    except ValueError:
                        raise DataError(f"cannot parse {cell!r} as a number", line=line, column=col.name) from None
                else:
                    raw[col.name].append(cell)
    return Dataset.from_columns(schema, raw)


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset.schema.names)
        cols = []
        for col in dataset.schema.columns:
            v = dataset.column(col.name)
            if col.kind == "categorical":
                cols.append(["" if x is None else x for x in dataset.decode(col.name, v)])
            else:
                cols.append(["" if np.isnan(x) else repr(float(x)) for x in v])
        writer.writerows(zip(*cols))


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random partition into (train, test).

    The test set has ``round(n * test_fraction)`` rows; both parts keep the
    original row order.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    n = dataset.n_rows
    n_test = int(round(n * test_fraction))
    perm = np.random.default_rng(seed).permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    return dataset.take(train_rows), dataset.take(test_rows)


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("rmse of an empty sample is undefined")
    return float(np.sqrt(np.mean((p - t) ** 2)))
