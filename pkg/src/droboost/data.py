"""CSV ingestion and reproducible train/test splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset, DataError

MASK64 = (1 << 64) - 1
UCI_PREDICTORS = 23


class SplitMix64:
    """SplitMix64 stream (Steele, Lea and Flood), fixed across platforms."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, without modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n


def permutation(n: int, seed: int) -> np.ndarray:
    """Fisher-Yates shuffle of range(n) driven by SplitMix64."""
    rng = SplitMix64(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(perm, dtype=np.intp)


@dataclass(frozen=True)
class Schema:
    """``kind`` is ``"uci_credit"`` or ``"generic"``.

    For ``generic`` the label column is named by ``label_column`` and the
    value ``positive_value`` maps to +1, anything else to -1.  ``skip_rows``
    header lines are skipped; the last of them holds the column names.
    """

    kind: str = "generic"
    label_column: Optional[str] = None
    positive_value: str = "1"
    skip_rows: int = 1

    def __post_init__(self):
        if self.kind not in ("uci_credit", "generic"):
            raise ValueError(f"unknown schema {self.kind!r}")
        if self.kind == "generic" and not self.label_column:
            raise ValueError("generic schema needs a label column")
        if self.skip_rows < 0:
            raise ValueError("skip_rows must be >= 0")


UCI_SCHEMA = Schema(kind="uci_credit", label_column=None, positive_value="1", skip_rows=1)


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: non-numeric value {cell!r}") from None


def _same_value(cell: str, positive: str) -> bool:
    cell = cell.strip()
    if cell == positive:
        return True
    try:
        return float(cell) == float(positive)
    except ValueError:
        return False


def load_csv(path, schema: Schema) -> Dataset:
    """Read a comma separated file into a Dataset.

    ``uci_credit``: first column is the ID and is dropped, the last column is
    the default indicator (1 -> +1, 0 -> -1), the 23 columns in between are the
    predictors.  Row numbers in error messages are 1-based file lines.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    # drop trailing blank lines
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if len(rows) <= schema.skip_rows:
        raise DataError(f"{path}: no data rows")
    header = [c.strip() for c in rows[schema.skip_rows - 1]] if schema.skip_rows else None
    body = rows[schema.skip_rows:]
    width = len(body[0])
    if header is not None and len(header) != width:
        raise DataError(f"{path}: header has {len(header)} columns, data has {width}")
    names = header or [str(j) for j in range(width)]

    if schema.kind == "uci_credit":
        if width != UCI_PREDICTORS + 2:
            raise DataError(f"{path}: expected {UCI_PREDICTORS + 2} columns for the UCI credit schema, got {width}")
        label_idx = width - 1
        feature_idx = list(range(1, width - 1))
    else:
        if schema.label_column not in names:
            raise DataError(f"{path}: missing label column {schema.label_column!r}")
        label_idx = names.index(schema.label_column)
        feature_idx = [j for j in range(width) if j != label_idx]
    if not feature_idx:
        raise DataError(f"{path}: no feature columns")

    X = np.empty((len(body), len(feature_idx)))
    y = np.empty(len(body))
    for r, row in enumerate(body):
        line = r + schema.skip_rows + 1
        if len(row) != width:
            raise DataError(f"row {line}: expected {width} fields, got {len(row)}")
        for c, j in enumerate(feature_idx):
            X[r, c] = _parse_float(row[j], line, names[j])
        cell = row[label_idx]
        if schema.kind == "uci_credit":
            v = _parse_float(cell, line, names[label_idx])
            if v not in (0.0, 1.0):
                raise DataError(f"row {line}, column {names[label_idx]!r}: default flag must be 0 or 1, got {cell!r}")
            y[r] = 1.0 if v == 1.0 else -1.0
        else:
            y[r] = 1.0 if _same_value(cell, schema.positive_value) else -1.0
    return Dataset(X, y)


@dataclass(frozen=True)
class SplitSpec:
    train_size: int = 3000
    seed: int = 0
    shuffle: bool = True


def split(data: Dataset, spec: SplitSpec):
    """First ``train_size`` rows of a seeded permutation train, the rest test."""
    if not 0 < spec.train_size < data.N:
        raise ValueError(f"train_size must lie in (0, {data.N}), got {spec.train_size}")
    order = permutation(data.N, spec.seed) if spec.shuffle else np.arange(data.N)
    return data.subset(order[: spec.train_size]), data.subset(order[spec.train_size:])


def derived_seeds(master: int, count: int) -> list:
    rng = SplitMix64(master)
    return [rng.next_u64() for _ in range(count)]
