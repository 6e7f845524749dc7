"""AI4I 2020 ingestion, encoding, target derivation, scaling and splitting."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd

from .errors import (
    BadFraction,
    BadK,
    EmptyDataset,
    EmptyIndexSet,
    ConstantFeature,
    MissingColumn,
    MissingValue,
    NonBinaryValue,
    NonNumericCell,
    UnexpectedColumn,
    UnknownCategory,
)

logger = logging.getLogger(__name__)

ID_COLUMNS = ("UDI", "UID")
TYPE_COLUMN = "Type"
NUMERIC_COLUMNS = (
    "Air temperature [K]",
    "Process temperature [K]",
    "Rotational speed [rpm]",
    "Torque [Nm]",
    "Tool wear [min]",
)
FAILURE_COLUMN = "Machine failure"
FAULT_LABELS = ("TWF", "HDF", "PWF", "OSF", "RNF")
LABEL_COLUMNS = (FAILURE_COLUMN,) + FAULT_LABELS

# model inputs, in matrix column order
FEATURE_NAMES = (TYPE_COLUMN,) + NUMERIC_COLUMNS

TYPE_CODES = {"L": 0, "M": 1, "H": 2}

TargetMode = Literal["binary", "multilabel", "severity"]
TARGET_MODES = ("binary", "multilabel", "severity")


def schema(id_column: str = "UDI") -> list[tuple[str, str]]:
    """Ordered ``(name, kind)`` pairs of the 14 AI4I columns."""
    cols = [(id_column, "id"), ("Product ID", "id"), (TYPE_COLUMN, "categorical")]
    cols += [(c, "numeric") for c in NUMERIC_COLUMNS]
    cols += [(c, "binary-label") for c in LABEL_COLUMNS]
    return cols


@dataclass(frozen=True, eq=False)
class Dataset:
    """A validated AI4I table.

    ``frame`` keeps every column with its declared dtype. ``X`` is filled
    in by :func:`encode_features` (and rescaled by :func:`apply_standardizer`);
    identifiers never enter it.
    """

    frame: pd.DataFrame
    id_column: str = "UDI"
    X: np.ndarray | None = None
    feature_names: tuple[str, ...] = FEATURE_NAMES
    standardized: bool = False

    @property
    def rows(self) -> int:
        return len(self.frame)

    @property
    def columns(self) -> list[tuple[str, str]]:
        return schema(self.id_column)

    @property
    def features(self) -> np.ndarray:
        if self.X is None:
            return encode_features(self).X
        return self.X

    def label_matrix(self) -> np.ndarray:
        return self.frame[list(LABEL_COLUMNS)].to_numpy(dtype=np.int64)


def load_ai4i(path: str | Path) -> Dataset:
    """Read an AI4I-format CSV and validate it against the declared schema.

    Either ``UDI`` (the name used by the public file) or ``UID`` is accepted
    for the first column; the one seen is kept on the returned dataset.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyDataset(f"{path}: no header and no records") from None

    header = [c.strip() for c in raw.columns]
    raw.columns = header
    id_column = next((c for c in ID_COLUMNS if c in header), None)
    if id_column is None:
        raise MissingColumn(f"{path}: missing identifier column (UDI or UID)")
    expected = [name for name, _ in schema(id_column)]
    missing = [c for c in expected if c not in header]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {missing}")
    extra = [c for c in header if c not in expected]
    if extra:
        raise UnexpectedColumn(f"{path}: unexpected column(s) {extra}")
    if header != expected:
        raise UnexpectedColumn(f"{path}: columns out of order, expected {expected}")
    if raw.empty:
        raise EmptyDataset(f"{path}: header only, no records")

    blank = raw.apply(lambda s: s.str.strip() == "")
    if blank.to_numpy().any():
        r, c = np.argwhere(blank.to_numpy())[0]
        raise MissingValue(f"{path}: empty cell at row {r + 1}, column '{header[c]}'")

    frame = pd.DataFrame(index=raw.index)
    for name, kind in schema(id_column):
        col = raw[name].str.strip()
        if kind == "id" or kind == "categorical":
            frame[name] = col
            continue
        values = pd.to_numeric(col, errors="coerce")
        bad = values.isna().to_numpy()
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            raise NonNumericCell(f"{path}: non-numeric value {col.iloc[r]!r} at row {r + 1}, column '{name}'")
        if kind == "binary-label":
            if not values.isin([0, 1]).all():
                r = int(np.flatnonzero(~values.isin([0, 1]).to_numpy())[0])
                raise NonBinaryValue(f"{path}: label '{name}' has value {col.iloc[r]!r} at row {r + 1}")
            frame[name] = values.astype(np.int64)
        else:
            frame[name] = values.astype(np.float64)
    frame[id_column] = pd.to_numeric(frame[id_column], errors="coerce")
    if frame[id_column].isna().any():
        raise NonNumericCell(f"{path}: non-numeric {id_column}")
    frame[id_column] = frame[id_column].astype(np.int64)

    logger.info("loaded %d records from %s (id column %s)", len(frame), path, id_column)
    return Dataset(frame=frame.reset_index(drop=True), id_column=id_column)


def write_ai4i(d: Dataset | pd.DataFrame, path: str | Path) -> Path:
    frame = d.frame if isinstance(d, Dataset) else d
    path = Path(path)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def encode_features(d: Dataset) -> Dataset:
    """Build the 6-column feature matrix (Type mapped L->0, M->1, H->2)."""
    types = d.frame[TYPE_COLUMN]
    unknown = sorted(set(types) - set(TYPE_CODES))
    if unknown:
        raise UnknownCategory(f"product type(s) {unknown} outside {{L, M, H}}")
    X = np.empty((d.rows, len(FEATURE_NAMES)), dtype=np.float64)
    X[:, 0] = types.map(TYPE_CODES).to_numpy(dtype=np.float64)
    X[:, 1:] = d.frame[list(NUMERIC_COLUMNS)].to_numpy(dtype=np.float64)
    return replace(d, X=X, standardized=False)


def derive_target(d: Dataset, mode: TargetMode = "severity") -> np.ndarray:
    """Target vector (binary, severity) or n x 5 flag matrix (multilabel).

    Severity is the number of raised fault flags per record, used as a
    real-valued regression target.
    """
    if mode == "binary":
        return d.frame[FAILURE_COLUMN].to_numpy(dtype=np.float64)
    flags = d.frame[list(FAULT_LABELS)].to_numpy(dtype=np.float64)
    if mode == "multilabel":
        return flags
    if mode == "severity":
        return flags.sum(axis=1)
    raise ValueError(f"unknown target mode {mode!r}; expected one of {TARGET_MODES}")


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray = field(default=None)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            scale=np.asarray(d["scale"], dtype=np.float64),
            constant=np.asarray(d["constant"], dtype=bool),
        )


def _matrix(d) -> np.ndarray:
    if isinstance(d, Dataset):
        return d.features
    return np.asarray(d, dtype=np.float64)


def fit_standardizer(d, rows=None) -> Standardizer:
    """Fit per-feature z-score statistics on ``rows`` only.

    Uses the population standard deviation. A constant feature keeps a
    scale of 1 (so it maps to 0) and raises a ``ConstantFeature`` warning.
    """
    X = _matrix(d)
    if X.ndim == 1:
        X = X[:, None]
    if rows is not None:
        rows = np.asarray(rows)
        if rows.size == 0:
            raise EmptyIndexSet("cannot fit a standardizer on zero rows")
        X = X[rows]
    elif X.shape[0] == 0:
        raise EmptyIndexSet("cannot fit a standardizer on zero rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if constant.any():
        warnings.warn(f"constant feature(s) at column(s) {np.flatnonzero(constant).tolist()}", ConstantFeature, stacklevel=2)
    scale = np.where(constant, 1.0, std)
    return Standardizer(mean=mean, scale=scale, constant=constant)


def apply_standardizer(s: Standardizer, d):
    """Rescale a Dataset's feature matrix (or a bare array) with ``s``."""
    if isinstance(d, Dataset):
        return replace(d, X=s.transform(d.features), standardized=True)
    X = np.asarray(d, dtype=np.float64)
    if X.ndim == 1:
        return s.transform(X[:, None])[:, 0]
    return s.transform(X)


def _count(d) -> int:
    if isinstance(d, Dataset):
        return d.rows
    if isinstance(d, (int, np.integer)):
        return int(d)
    return len(d)


def train_test_split(d, test_fraction: float = 0.2, seed: int = 42) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle split; ``|test| = round(n * test_fraction)`` (half up)."""
    if not 0.0 < test_fraction < 1.0:
        raise BadFraction(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = _count(d)
    n_test = int(np.floor(n * test_fraction + 0.5))
    if n_test == 0 or n_test == n:
        raise BadFraction(f"test_fraction {test_fraction} leaves an empty side for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int
    stratify: str | None = None

    @property
    def n(self) -> int:
        return len(self.assignments)

    def test_rows(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == i)

    def train_rows(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != i)

    def folds(self):
        for i in range(self.k):
            yield self.train_rows(i), self.test_rows(i)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "stratify": self.stratify, "assignments": self.assignments.tolist()}


def kfold(n, k: int = 5, seed: int = 42, stratify=None, stratify_name: str | None = None) -> FoldPlan:
    """Seeded k-fold assignment.

    Rows are shuffled (within each class when ``stratify`` labels are given),
    classes are laid end to end and dealt round-robin, which keeps fold sizes
    and per-class counts within one of each other.
    """
    n = _count(n)
    if k < 2 or k > n:
        raise BadK(f"k must satisfy 2 <= k <= n (k={k}, n={n})")
    rng = np.random.default_rng(seed)
    if stratify is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray(stratify)
        if len(labels) != n:
            raise BadK(f"stratify labels have length {len(labels)}, expected {n}")
        blocks = []
        for value in np.unique(labels):
            members = np.flatnonzero(labels == value)
            blocks.append(members[rng.permutation(len(members))])
        order = np.concatenate(blocks)
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % k
    name = stratify_name if stratify is not None else None
    if stratify is not None and name is None:
        name = "labels"
    return FoldPlan(k=k, assignments=assignments, seed=seed, stratify=name)
