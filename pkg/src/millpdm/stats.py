"""Pearson correlation over features and failure labels."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .dataset import LABEL_COLUMNS, NUMERIC_COLUMNS, Dataset
from .errors import ConstantColumn, TooFewRows, UnknownColumn

DEFAULT_COLUMNS = NUMERIC_COLUMNS + LABEL_COLUMNS


@dataclass(frozen=True, eq=False)
class CorrMatrix:
    names: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        try:
            i, j = self.names.index(a), self.names.index(b)
        except ValueError:
            raise UnknownColumn(f"{pair} not in {self.names}") from None
        return float(self.values[i, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([""] + list(self.names))
        for name, row in zip(self.names, self.values):
            writer.writerow([name] + [repr(float(v)) for v in row])
        return buf.getvalue()


def pearson_matrix(d: Dataset | pd.DataFrame, columns=DEFAULT_COLUMNS) -> CorrMatrix:
    """Pairwise Pearson r (0/1 columns give the point-biserial value).

    A constant column correlates 0 with everything else (with a
    ``ConstantColumn`` warning) and 1 with itself.
    """
    frame = d.frame if isinstance(d, Dataset) else d
    columns = tuple(columns)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise UnknownColumn(f"unknown column(s) {missing}")
    if len(frame) < 2:
        raise TooFewRows(f"need at least 2 rows, got {len(frame)}")
    try:
        X = frame[list(columns)].to_numpy(dtype=np.float64)
    except (TypeError, ValueError):
        raise UnknownColumn(f"non-numeric column among {columns}") from None
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / (n - 1)
    std = np.sqrt(np.diag(cov))
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0))
    if constant.any():
        warnings.warn(
            f"constant column(s) {[columns[i] for i in np.flatnonzero(constant)]}; correlations set to 0",
            ConstantColumn,
            stacklevel=2,
        )
    safe = np.where(constant, 1.0, std)
    r = cov / np.outer(safe, safe)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    r = np.clip(r, -1.0, 1.0)
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    return CorrMatrix(names=columns, values=r)
