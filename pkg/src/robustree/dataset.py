"""Mixed-type observation tables.

Numeric columns are stored as floats; categorical columns are stored as the
integer index of the label in the column vocabulary, so a whole table fits in
one float matrix.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError

KINDS = ("continuous", "discrete", "categorical")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = "continuous"
    categories: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind == "categorical":
            if not self.categories or len(set(self.categories)) != len(self.categories):
                raise InvalidInputError(
                    f"column {self.name!r}: categorical columns need a unique vocabulary")
        elif self.categories:
            raise InvalidInputError(f"column {self.name!r}: only categorical columns take categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.categories:
            d["categories"] = list(self.categories)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Column":
        try:
            return cls(d["name"], d.get("kind", "continuous"), tuple(d.get("categories", ())))
        except KeyError:
            raise InvalidInputError("schema column entries need a 'name'") from None


def continuous_columns(n: int, prefix: str = "x") -> tuple[Column, ...]:
    return tuple(Column(f"{prefix}{i}") for i in range(n))


def encode_rows(columns: Sequence[Column], rows: Iterable[Sequence]) -> np.ndarray:
    """Turn rows of raw values (category labels allowed) into a float matrix."""
    out = []
    for r, row in enumerate(rows):
        row = list(row)
        if len(row) != len(columns):
            raise InvalidInputError(f"row {r} has {len(row)} entries, expected {len(columns)}")
        enc = []
        for col, v in zip(columns, row):
            if col.is_categorical:
                if v not in col.categories:
                    # CSV readers hand back strings
                    matches = [c for c in col.categories if str(c) == str(v)]
                    if not matches:
                        raise InvalidInputError(
                            f"row {r}: {v!r} is not in the vocabulary of {col.name!r}")
                    v = matches[0]
                enc.append(float(col.categories.index(v)))
            else:
                try:
                    enc.append(float(v))
                except (TypeError, ValueError):
                    raise InvalidInputError(f"row {r}: {col.name!r} value {v!r} is not numeric") from None
        out.append(enc)
    return np.asarray(out, dtype=float).reshape(-1, len(columns))


def validate_matrix(columns: Sequence[Column], X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != len(columns):
        raise InvalidInputError(f"expected points with {len(columns)} coordinates, got shape {X.shape}")
    for d, col in enumerate(columns):
        v = X[:, d]
        if not np.all(np.isfinite(v)):
            raise InvalidInputError(f"column {col.name!r} has non-finite entries")
        if col.kind == "discrete" and np.any(v != np.round(v)):
            raise InvalidInputError(f"column {col.name!r} is discrete but has non-integer entries")
        if col.is_categorical and (np.any(v != np.round(v)) or np.any(v < 0)
                                   or np.any(v >= len(col.categories))):
            raise InvalidInputError(f"column {col.name!r} has codes outside its vocabulary")
    return X


@dataclass
class Dataset:
    """Observation table: encoded inputs ``X`` (K x D) and targets ``y`` (K,)."""

    columns: tuple[Column, ...]
    X: np.ndarray
    y: np.ndarray
    target_name: str = "f"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        if not self.columns:
            raise InvalidInputError("a dataset needs at least one column")
        self.X = validate_matrix(self.columns, self.X)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if len(self.X) == 0:
            raise InvalidInputError("dataset is empty")
        if len(self.y) != len(self.X):
            raise InvalidInputError(f"{len(self.X)} rows but {len(self.y)} targets")
        if not np.all(np.isfinite(self.y)):
            raise InvalidInputError("targets must be finite")

    @classmethod
    def from_rows(cls, columns, rows, targets, **kw) -> "Dataset":
        columns = tuple(columns)
        return cls(columns, encode_rows(columns, rows), targets, **kw)

    @classmethod
    def from_arrays(cls, X, y, columns=None, **kw) -> "Dataset":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if columns is None:
            columns = continuous_columns(X.shape[1])
        return cls(tuple(columns), X, y, **kw)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def decode(self, X=None) -> list[list]:
        """Rows with category codes replaced by labels."""
        X = self.X if X is None else np.atleast_2d(X)
        rows = []
        for x in X:
            rows.append([c.categories[int(v)] if c.is_categorical else
                         (int(v) if c.kind == "discrete" else float(v))
                         for c, v in zip(self.columns, x)])
        return rows


def load_schema(path: str | Path) -> tuple[tuple[Column, ...], str | None]:
    """Read a schema document.

    Format::

        {"columns": [{"name": "temp", "kind": "continuous"},
                     {"name": "solvent", "kind": "categorical",
                      "categories": ["water", "ethanol"]}],
         "target": "yield"}
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"schema file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"cannot parse schema {path}: {exc}") from None
    cols = doc.get("columns")
    if not isinstance(cols, list) or not cols:
        raise InvalidInputError(f"schema {path} needs a non-empty 'columns' list")
    return tuple(Column.from_dict(c) for c in cols), doc.get("target")


def save_schema(path: str | Path, columns: Sequence[Column], target: str | None = "f") -> None:
    doc = {"columns": [c.to_dict() for c in columns]}
    if target is not None:
        doc["target"] = target
    Path(path).write_text(json.dumps(doc, indent=2))


def read_table(csv_path: str | Path, columns: Sequence[Column], target: str | None):
    """Read the schema columns (and the target if present) from a CSV file.

    Returns ``(X, y)``; ``y`` is ``None`` when the CSV has no target column.
    """
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise InvalidInputError(f"dataset file not found: {csv_path}")
    with csv_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c.name for c in columns if c.name not in header]
        if missing:
            raise InvalidInputError(f"{csv_path}: missing columns {missing}")
        records = list(reader)
    X = encode_rows(columns, ([rec[c.name] for c in columns] for rec in records))
    X = validate_matrix(columns, X) if len(X) else X
    y = None
    if target is not None and target in header:
        try:
            y = np.array([float(rec[target]) for rec in records])
        except ValueError:
            raise InvalidInputError(f"{csv_path}: target column {target!r} is not numeric") from None
    return X, y


def load_dataset(csv_path: str | Path, schema_path: str | Path) -> Dataset:
    columns, target = load_schema(schema_path)
    target = target or "f"
    X, y = read_table(csv_path, columns, target)
    if y is None:
        raise InvalidInputError(f"{csv_path}: target column {target!r} not found")
    return Dataset(columns, X, y, target_name=target)


def save_dataset(csv_path: str | Path, dataset: Dataset) -> None:
    with Path(csv_path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.names + [dataset.target_name])
        for row, f in zip(dataset.decode(), dataset.y):
            w.writerow(row + [repr(float(f))])
