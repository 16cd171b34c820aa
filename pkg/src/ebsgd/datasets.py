"""CSV ingestion for labeled data."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .sgd import ArrayStream

__all__ = ["DataError", "CsvSplit", "CsvTable", "csv_stream", "read_labeled_csv", "read_matrix_csv"]


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass
class CsvSplit:
    """Seeded shuffle-then-split of a CSV file.

    ``train_index`` and ``test_index`` are positions among the rows that
    parsed cleanly; ``skipped`` lists ``(line number, reason)`` for the rest.
    """

    columns: list
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    train_index: np.ndarray
    test_index: np.ndarray
    skipped: list = field(default_factory=list)
    seed: int | None = None
    split: float = 0.5

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)

    def train_stream(self) -> ArrayStream:
        return ArrayStream(self.train_x, self.train_y)

    @property
    def test(self):
        return self.test_x, self.test_y

    @property
    def train(self):
        return self.train_x, self.train_y

    def manifest(self) -> dict:
        return {
            "columns": list(self.columns),
            "seed": self.seed,
            "split": self.split,
            "n_train": int(len(self.train_y)),
            "n_test": int(len(self.test_y)),
            "skipped": [{"line": ln, "reason": why} for ln, why in self.skipped],
            "train_index": self.train_index.tolist(),
            "test_index": self.test_index.tolist(),
        }

    def write_manifest(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def _parse(cell: str) -> float:
    v = float(cell)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {cell!r}")
    return v


@dataclass
class CsvTable:
    columns: list
    x: np.ndarray
    y: np.ndarray
    skipped: list


def read_labeled_csv(path, response_column: str, feature_columns=None, intercept: bool = False,
                     binary: bool = True) -> CsvTable:
    """Rows of ``path`` in file order as a feature matrix and response vector.

    Rows with a missing or non-numeric cell are skipped and recorded as
    ``(line number, reason)``. With ``binary`` a response other than 0/1 is an
    error. ``feature_columns`` defaults to every non-response column.
    """
    try:
        fh = open(path, newline="")
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from err
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if response_column not in header:
            raise DataError(f"response column {response_column!r} not in header {header}")
        if feature_columns is None:
            feature_columns = [h for h in header if h != response_column]
        missing = [c for c in feature_columns if c not in header]
        if missing:
            raise DataError(f"feature columns not in header: {', '.join(map(repr, missing))}")
        if not feature_columns:
            raise DataError("no feature columns")
        y_at = header.index(response_column)
        x_at = [header.index(c) for c in feature_columns]
        xs, ys, skipped = [], [], []
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                skipped.append((line, f"expected {len(header)} fields, found {len(row)}"))
                continue
            try:
                yv = _parse(row[y_at])
                xv = [_parse(row[i]) for i in x_at]
            except ValueError as err:
                skipped.append((line, str(err)))
                continue
            if binary and yv not in (0.0, 1.0):
                raise DataError(
                    f"line {line}, column {response_column!r}: response {row[y_at]!r} is not 0 or 1"
                )
            xs.append(xv)
            ys.append(yv)
    if len(ys) < 2:
        raise DataError(f"{path}: fewer than two usable rows")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    cols = list(feature_columns)
    if intercept:
        x = np.column_stack([np.ones(len(y)), x])
        cols = ["(intercept)"] + cols
    return CsvTable(cols, x, y, skipped)


def csv_stream(path, response_column: str, feature_columns=None, split: float = 0.5, seed=0,
               intercept: bool = False) -> CsvSplit:
    """Read ``path`` and split its rows into a training stream and a test set.

    The usable rows are shuffled with ``seed`` and the first ``split``
    fraction forms the training set. The response must be 0/1.
    """
    if not 0 < split < 1:
        raise DataError(f"split must lie in (0, 1), got {split}")
    t = read_labeled_csv(path, response_column, feature_columns, intercept)
    n = len(t.y)
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(round(split * n)), 1), n - 1)
    tr, te = order[:n_train], order[n_train:]
    return CsvSplit(t.columns, t.x[tr], t.y[tr], t.x[te], t.y[te], tr, te, t.skipped, seed, split)


def read_matrix_csv(path) -> np.ndarray:
    """Numeric CSV (optional header row) as a 2-D array."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from err
    if not rows:
        raise DataError(f"{path} is empty")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        out = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as err:
        raise DataError(f"{path}: non-numeric cell ({err})") from err
    if out.ndim != 2 or out.size == 0:
        raise DataError(f"{path}: rows have unequal lengths or no data")
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: non-finite values")
    return out
