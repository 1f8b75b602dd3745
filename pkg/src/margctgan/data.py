"""Columnar tables, schema manifests, CSV ingestion, splitting, subsampling."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NUMERICAL = "numerical"
CATEGORICAL = "categorical"

#: Sentinel subset size meaning "use every row".
FULL = -1


class DataError(ValueError):
    """Malformed schema, manifest, or data file."""


@dataclass(frozen=True)
class Column:
    """One column declaration: a name plus its kind.

    Categorical columns carry an ordered, duplicate-free list of labels;
    the label order fixes the integer codes and one-hot layout everywhere.
    """

    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (NUMERICAL, CATEGORICAL):
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.categories:
                raise DataError(f"column {self.name!r}: categorical needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise DataError(f"column {self.name!r}: duplicate category labels")
        elif self.categories:
            raise DataError(f"column {self.name!r}: numerical column with categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def cardinality(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class Schema:
    """Ordered column declarations plus an optional prediction target."""

    columns: tuple[Column, ...]
    target: str | None = None
    task: str = "classification"
    positive_label: str | None = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in schema")
        if self.task not in ("classification", "regression"):
            raise DataError(f"unknown task {self.task!r}")
        if self.target is not None:
            tcol = self.column(self.target)
            if self.task == "classification" and not tcol.is_categorical:
                raise DataError("classification target must be categorical")
            if self.task == "regression" and tcol.is_categorical:
                raise DataError("regression target must be numerical")
            if self.positive_label is not None:
                if self.positive_label not in tcol.categories:
                    raise DataError(
                        f"positive_label {self.positive_label!r} not a target category"
                    )
        elif self.positive_label is not None:
            raise DataError("positive_label requires a target")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise DataError(f"no column named {name!r}")

    @property
    def numerical_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if not c.is_categorical)

    @property
    def categorical_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.is_categorical)

    def drop(self, name: str) -> "Schema":
        """Schema without `name` and without any target/task tied to it."""
        cols = tuple(c for c in self.columns if c.name != name)
        if len(cols) == len(self.columns):
            raise DataError(f"no column named {name!r}")
        return Schema(cols, target=None, task="classification", positive_label=None)


def schema_from_manifest(manifest: dict) -> Schema:
    """Build a Schema from the JSON manifest object."""
    try:
        raw_cols = manifest["columns"]
    except (KeyError, TypeError):
        raise DataError("manifest must be an object with a 'columns' list")
    columns = []
    for entry in raw_cols:
        name = entry.get("name")
        kind = entry.get("kind")
        if name is None or kind is None:
            raise DataError(f"manifest column entry missing name/kind: {entry!r}")
        cats = tuple(str(c) for c in entry.get("categories", ()))
        columns.append(Column(name=str(name), kind=str(kind), categories=cats))
    return Schema(
        columns=tuple(columns),
        target=manifest.get("target"),
        task=manifest.get("task", "classification"),
        positive_label=manifest.get("positive_label"),
    )


def schema_to_manifest(schema: Schema) -> dict:
    cols = []
    for c in schema.columns:
        entry: dict = {"name": c.name, "kind": c.kind}
        if c.is_categorical:
            entry["categories"] = list(c.categories)
        cols.append(entry)
    manifest: dict = {"columns": cols, "task": schema.task}
    if schema.target is not None:
        manifest["target"] = schema.target
    if schema.positive_label is not None:
        manifest["positive_label"] = schema.positive_label
    return manifest


def load_schema(path) -> Schema:
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_manifest(json.load(fh))


def save_schema(schema: Schema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema_to_manifest(schema), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class Table:
    """Immutable columnar dataset.

    Numerical cells live in a float64 matrix, categorical cells as integer
    codes into each column's category list; both in schema order of their kind.
    """

    schema: Schema
    numerical: np.ndarray
    categorical: np.ndarray

    def __post_init__(self):
        num = np.asarray(self.numerical, dtype=np.float64)
        cat = np.asarray(self.categorical, dtype=np.int64)
        if num.ndim != 2 or cat.ndim != 2:
            raise DataError("numerical/categorical blocks must be 2-D")
        n_num = len(self.schema.numerical_names)
        n_cat = len(self.schema.categorical_names)
        if num.shape[1] != n_num or cat.shape[1] != n_cat:
            raise DataError("column count does not match schema")
        if num.shape[0] != cat.shape[0]:
            raise DataError("row count mismatch between blocks")
        if num.size and not np.all(np.isfinite(num)):
            raise DataError("non-finite numerical cell")
        for j, name in enumerate(self.schema.categorical_names):
            card = self.schema.column(name).cardinality
            col = cat[:, j]
            if col.size and (col.min() < 0 or col.max() >= card):
                raise DataError(f"category code out of range in column {name!r}")
        object.__setattr__(self, "numerical", num)
        object.__setattr__(self, "categorical", cat)
        # write-protect the buffers: tables are shared freely
        num.flags.writeable = False
        cat.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return self.numerical.shape[0]

    def numerical_column(self, name: str) -> np.ndarray:
        return self.numerical[:, self.schema.numerical_names.index(name)]

    def categorical_codes(self, name: str) -> np.ndarray:
        return self.categorical[:, self.schema.categorical_names.index(name)]

    def labels(self, name: str) -> list[str]:
        cats = self.schema.column(name).categories
        return [cats[i] for i in self.categorical_codes(name)]

    def take(self, rows: np.ndarray) -> "Table":
        rows = np.asarray(rows)
        return Table(self.schema, self.numerical[rows].copy(), self.categorical[rows].copy())

    def column_values(self, name: str) -> np.ndarray:
        """Numerical values or integer codes, depending on the column kind."""
        if self.schema.column(name).is_categorical:
            return self.categorical_codes(name)
        return self.numerical_column(name)


def empty_table(schema: Schema) -> Table:
    n_num = len(schema.numerical_names)
    n_cat = len(schema.categorical_names)
    return Table(schema, np.empty((0, n_num)), np.empty((0, n_cat), dtype=np.int64))


def _is_missing(token: str) -> bool:
    return token.strip() == ""


def load_csv(path, schema) -> Table:
    """Read an RFC-4180 CSV with header into a Table.

    `schema` may be a Schema or a path to a JSON manifest.  Rows with empty
    (missing) cells are dropped; malformed cells raise with their location.
    """
    if not isinstance(schema, Schema):
        schema = load_schema(schema)
    num_names = schema.numerical_names
    cat_names = schema.categorical_names
    cat_index = {
        name: {lab: i for i, lab in enumerate(schema.column(name).categories)}
        for name in cat_names
    }
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required")
        pos = {name: i for i, name in enumerate(header)}
        for name in schema.names:
            if name not in pos:
                raise DataError(f"{path}: missing column {name!r}")
        num_pos = [pos[n] for n in num_names]
        cat_pos = [pos[n] for n in cat_names]

        num_rows: list[list[float]] = []
        cat_rows: list[list[int]] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            if any(_is_missing(row[i]) for i in num_pos + cat_pos):
                continue  # missing values rejected at ingestion
            nums = []
            for name, i in zip(num_names, num_pos):
                try:
                    nums.append(float(row[i]))
                except ValueError:
                    raise DataError(
                        f"{path}:{line_no}: non-numeric token {row[i]!r} in column {name!r}"
                    )
            cats = []
            for name, i in zip(cat_names, cat_pos):
                code = cat_index[name].get(row[i])
                if code is None:
                    raise DataError(
                        f"{path}:{line_no}: unknown category {row[i]!r} in column {name!r}"
                    )
                cats.append(code)
            num_rows.append(nums)
            cat_rows.append(cats)

    num = np.array(num_rows, dtype=np.float64).reshape(len(num_rows), len(num_names))
    cat = np.array(cat_rows, dtype=np.int64).reshape(len(cat_rows), len(cat_names))
    return Table(schema, num, cat)


def write_csv(table: Table, path) -> None:
    """Write a Table back to CSV; numerals use shortest round-trip decimals."""
    schema = table.schema
    num_names = schema.numerical_names
    cat_names = schema.categorical_names
    cats = {name: schema.column(name).categories for name in cat_names}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(schema.names)
        for r in range(table.n_rows):
            row = []
            for name in schema.names:
                if name in cats:
                    row.append(cats[name][table.categorical_codes(name)[r]])
                else:
                    row.append(repr(float(table.numerical_column(name)[r])))
            writer.writerow(row)


def split(table: Table, test_fraction: float, seed: int) -> tuple[Table, Table]:
    """Disjoint (train, test) partition; deterministic given the seed."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0,1), got {test_fraction}")
    n = table.n_rows
    if n < 2:
        raise DataError("need at least 2 rows to split")
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    return table.take(train_rows), table.take(test_rows)


def subsample(table: Table, n: int, seed: int) -> Table:
    """n rows drawn uniformly without replacement; FULL returns the input."""
    if n == FULL:
        return table
    if not 1 <= n <= table.n_rows:
        raise DataError(f"subsample size {n} outside [1, {table.n_rows}]")
    rows = np.sort(np.random.default_rng(seed).permutation(table.n_rows)[:n])
    return table.take(rows)


# ---------------------------------------------------------------------------
# Toy data generator (test fixture / desk-scale experiments)

@dataclass(frozen=True)
class MixtureColumn:
    """Numerical column sampled from a 1-D Gaussian mixture."""

    name: str
    means: tuple[float, ...]
    stds: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        k = len(self.means)
        if not (k and len(self.stds) == k and len(self.weights) == k):
            raise DataError(f"column {self.name!r}: mismatched mixture parameter lengths")
        if any(s <= 0 for s in self.stds):
            raise DataError(f"column {self.name!r}: stds must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise DataError(f"column {self.name!r}: mixture weights must sum to 1")

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))


@dataclass(frozen=True)
class PriorColumn:
    """Categorical column sampled from fixed class priors."""

    name: str
    categories: tuple[str, ...]
    priors: tuple[float, ...]

    def __post_init__(self):
        if len(self.categories) != len(self.priors):
            raise DataError(f"column {self.name!r}: priors/categories length mismatch")
        if abs(sum(self.priors) - 1.0) > 1e-9:
            raise DataError(f"column {self.name!r}: priors must sum to 1")


@dataclass(frozen=True)
class TargetRule:
    """Overrides a categorical column by thresholding a numerical one.

    Category index = number of cuts below the source value; with probability
    `flip` the label is replaced by a uniformly random category.
    """

    target: str
    source: str
    cuts: tuple[float, ...]
    flip: float = 0.0


@dataclass(frozen=True)
class ToySpec:
    numericals: tuple[MixtureColumn, ...]
    categoricals: tuple[PriorColumn, ...]
    rule: TargetRule | None = None
    target: str | None = None
    task: str = "classification"

    def schema(self) -> Schema:
        cols = tuple(Column(c.name, NUMERICAL) for c in self.numericals) + tuple(
            Column(c.name, CATEGORICAL, c.categories) for c in self.categoricals
        )
        return Schema(cols, target=self.target, task=self.task)


def toy_dataset(spec: ToySpec, n: int, seed: int) -> Table:
    """Sample n i.i.d. rows from a mixture/prior description."""
    if not spec.numericals or not spec.categoricals:
        raise DataError("toy spec needs at least one numerical and one categorical column")
    schema = spec.schema()
    rng = np.random.default_rng(seed)

    num = np.empty((n, len(spec.numericals)))
    for j, col in enumerate(spec.numericals):
        comp = rng.choice(len(col.means), size=n, p=np.asarray(col.weights))
        num[:, j] = rng.normal(np.asarray(col.means)[comp], np.asarray(col.stds)[comp])

    ruled = spec.rule.target if spec.rule is not None else None
    cat = np.empty((n, len(spec.categoricals)), dtype=np.int64)
    for j, col in enumerate(spec.categoricals):
        if col.name == ruled:
            cat[:, j] = 0  # filled below
        else:
            cat[:, j] = rng.choice(len(col.categories), size=n, p=np.asarray(col.priors))

    if spec.rule is not None:
        rule = spec.rule
        source = num[:, [c.name for c in spec.numericals].index(rule.source)]
        j = [c.name for c in spec.categoricals].index(rule.target)
        card = len(spec.categoricals[j].categories)
        codes = np.searchsorted(np.asarray(rule.cuts), source)
        if rule.flip > 0 and n:
            flips = rng.random(n) < rule.flip
            codes = np.where(flips, rng.integers(0, card, size=n), codes)
        cat[:, j] = codes

    return Table(schema, num, cat)
