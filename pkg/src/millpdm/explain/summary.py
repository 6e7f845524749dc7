"""Aggregations of SHAP matrices: global ranking, dependence and local views."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from ..errors import Misaligned
from .core import ShapMatrix, ShapVector


@dataclass
class SummaryTable:
    """Features ordered by mean |phi| (descending, ties by column order)
    plus the per-row (phi, feature value) scatter behind a beeswarm."""

    features: list[str]
    mean_abs: np.ndarray
    order: np.ndarray
    values: np.ndarray
    X: np.ndarray
    base_value: float
    method: str
    conditioning: str

    @property
    def ranking(self) -> list[str]:
        return [self.features[i] for i in self.order]

    def top(self, k: int) -> list[str]:
        return self.ranking[:k]

    def to_dict(self) -> dict:
        return {
            "base_value": self.base_value,
            "method": self.method,
            "conditioning": self.conditioning,
            "n_rows": int(self.values.shape[0]),
            "ranking": [{"feature": self.features[i], "mean_abs_shap": float(self.mean_abs[i])} for i in self.order],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def scatter_csv(self) -> str:
        """Long format ``row, feature, value, shap`` in ranking order."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row", "feature", "value", "shap"])
        for j in self.order:
            for r in range(self.values.shape[0]):
                writer.writerow([r, self.features[j], repr(float(self.X[r, j])), repr(float(self.values[r, j]))])
        return buf.getvalue()


@dataclass
class DependenceTable:
    feature: str
    interaction: str | None
    value: np.ndarray
    shap: np.ndarray
    interaction_value: np.ndarray | None
    rows: np.ndarray

    def __len__(self):
        return len(self.value)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["row", self.feature, "shap"]
        if self.interaction is not None:
            header.append(self.interaction)
        writer.writerow(header)
        for k in range(len(self.value)):
            line = [int(self.rows[k]), repr(float(self.value[k])), repr(float(self.shap[k]))]
            if self.interaction is not None:
                line.append(repr(float(self.interaction_value[k])))
            writer.writerow(line)
        return buf.getvalue()


def _aligned(matrix: ShapMatrix, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape != matrix.values.shape:
        raise Misaligned(f"feature matrix shape {X.shape} does not match SHAP matrix shape {matrix.values.shape}")
    return X


def _column(matrix: ShapMatrix, name) -> int:
    if isinstance(name, (int, np.integer)):
        if not 0 <= name < len(matrix.feature_names):
            raise Misaligned(f"feature index {name} out of range")
        return int(name)
    try:
        return matrix.feature_names.index(name)
    except ValueError:
        raise Misaligned(f"unknown feature {name!r}; have {matrix.feature_names}") from None


def shap_summary(matrix: ShapMatrix, X) -> SummaryTable:
    X = _aligned(matrix, X)
    mean_abs = np.abs(matrix.values).mean(axis=0)
    order = np.argsort(-mean_abs, kind="stable")
    return SummaryTable(
        features=list(matrix.feature_names),
        mean_abs=mean_abs,
        order=order,
        values=matrix.values,
        X=X,
        base_value=matrix.base_value,
        method=matrix.method,
        conditioning=matrix.conditioning,
    )


def shap_dependence(matrix: ShapMatrix, X, feature, interaction=None) -> DependenceTable:
    """One (value, phi, interaction value) triple per row, sorted by value."""
    X = _aligned(matrix, X)
    j = _column(matrix, feature)
    order = np.argsort(X[:, j], kind="stable")
    k = None if interaction is None else _column(matrix, interaction)
    return DependenceTable(
        feature=matrix.feature_names[j],
        interaction=None if k is None else matrix.feature_names[k],
        value=X[order, j],
        shap=matrix.values[order, j],
        interaction_value=None if k is None else X[order, k],
        rows=order,
    )


def local_explanation(v: ShapVector) -> list[dict]:
    """Signed contributions ordered by |phi| descending (force-plot data)."""
    values = np.asarray(v.values, dtype=np.float64)
    if len(values) != len(v.feature_names):
        raise Misaligned(f"{len(values)} attributions for {len(v.feature_names)} feature names")
    if v.x is not None and np.shape(v.x) != values.shape:
        raise Misaligned(f"query row has shape {np.shape(v.x)}, attributions {values.shape}")
    order = np.argsort(-np.abs(values), kind="stable")
    out = []
    for i in order:
        out.append(
            {
                "feature": v.feature_names[i],
                "value": None if v.x is None else float(v.x[i]),
                "shap": float(values[i]),
                "direction": "up" if values[i] > 0 else ("down" if values[i] < 0 else "none"),
            }
        )
    return out
