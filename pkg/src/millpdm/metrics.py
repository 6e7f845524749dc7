"""Regression metrics, per-label classification metrics and model ranking.

Variances use the population convention (divide by n) throughout, which
makes ``R2 = 1 - MSE / Var(y)`` and ``EVS - R2 = mean(residual)^2 / Var(y)``
hold exactly.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    EmptyReportList,
    LengthMismatch,
    NonBinaryValue,
    ShapeMismatch,
    TooFewSamples,
    ZeroDivisionConvention,
    ZeroVariance,
)

TABLE_COLUMNS = ("MSE", "MAE", "RMSE", "R2", "EVS", "MaxError")


@dataclass
class LabelMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass
class EvalReport:
    model: str
    mse: float
    mae: float
    rmse: float
    r2: float
    evs: float
    max_error: float
    n: int
    split: str = ""
    labels: dict[str, LabelMetrics] | None = field(default=None)

    def table_row(self) -> dict:
        return {
            "Model": self.model,
            "MSE": self.mse,
            "MAE": self.mae,
            "RMSE": self.rmse,
            "R2": self.r2,
            "EVS": self.evs,
            "MaxError": self.max_error,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.labels is None:
            d.pop("labels")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        d = dict(d)
        labels = d.pop("labels", None)
        if labels is not None:
            labels = {k: LabelMetrics(**v) for k, v in labels.items()}
        return cls(**d, labels=labels)


def regression_metrics(y_true, y_pred, model: str = "", split: str = "") -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"y_true has {len(y_true)} values, y_pred has {len(y_pred)}")
    n = len(y_true)
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    var_y = float(np.var(y_true))
    if var_y == 0.0:
        raise ZeroVariance("y_true is constant; R2 and EVS are undefined")
    resid = y_true - y_pred
    mse = float(np.mean(resid**2))
    abs_resid = np.abs(resid)
    return EvalReport(
        model=model,
        mse=mse,
        mae=float(abs_resid.mean()),
        rmse=float(np.sqrt(mse)),
        r2=1.0 - mse / var_y,
        evs=1.0 - float(np.var(resid)) / var_y,
        max_error=float(abs_resid.max()),
        n=n,
        split=split,
    )


def _ratio(num: int, den: int, what: str, label: str) -> float:
    if den == 0:
        warnings.warn(f"{what} undefined for label {label!r} (zero denominator); reported as 0", ZeroDivisionConvention, stacklevel=3)
        return 0.0
    return num / den


def classification_metrics(y_true, y_pred, labels=None) -> dict[str, LabelMetrics]:
    """Precision, recall and F1 per label column of two 0/1 matrices.

    A zero denominator yields 0 and a ``ZeroDivisionConvention`` warning.
    """
    Yt = np.asarray(y_true)
    Yp = np.asarray(y_pred)
    if Yt.shape != Yp.shape:
        raise ShapeMismatch(f"y_true shape {Yt.shape} != y_pred shape {Yp.shape}")
    if Yt.ndim == 1:
        Yt, Yp = Yt[:, None], Yp[:, None]
    for arr, name in ((Yt, "y_true"), (Yp, "y_pred")):
        if not np.isin(arr, (0, 1)).all():
            raise NonBinaryValue(f"{name} contains values other than 0/1")
    Yt = Yt.astype(bool)
    Yp = Yp.astype(bool)
    if labels is None:
        labels = [str(j) for j in range(Yt.shape[1])]
    if len(labels) != Yt.shape[1]:
        raise ShapeMismatch(f"{len(labels)} label names for {Yt.shape[1]} columns")
    out = {}
    for j, label in enumerate(labels):
        t, p = Yt[:, j], Yp[:, j]
        tp = int((t & p).sum())
        fp = int((~t & p).sum())
        fn = int((t & ~p).sum())
        tn = int((~t & ~p).sum())
        precision = _ratio(tp, tp + fp, "precision", label)
        recall = _ratio(tp, tp + fn, "recall", label)
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        out[label] = LabelMetrics(precision, recall, f1, int(t.sum()), tp, fp, fn, tn)
    return out


def rank_models(reports: list[EvalReport]) -> list[EvalReport]:
    """Ascending RMSE; ties broken by MAE, then model name."""
    if not reports:
        raise EmptyReportList("no reports to rank")
    return sorted(reports, key=lambda r: (r.rmse, r.mae, r.model))


def reports_to_json(reports: list[EvalReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def reports_to_csv(reports: list[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=("Model",) + TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.table_row().items()})
    return buf.getvalue()
