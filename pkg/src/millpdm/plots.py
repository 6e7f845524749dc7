"""Figures as SVG plus the CSV of the plotted points.

SVGs are written with a fixed hash salt and no date stamp so identical
inputs give identical files.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .explain import DependenceTable, SummaryTable  # noqa: E402
from .stats import CorrMatrix  # noqa: E402

DEFAULT_BINS = 30
_SVG_METADATA = {"Date": None, "Creator": "millpdm"}


@dataclass
class Figure:
    name: str
    svg: Path
    csv: Path


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bin", "left", "right", "count"])
        for i, c in enumerate(self.counts):
            writer.writerow([i, repr(float(self.edges[i])), repr(float(self.edges[i + 1])), int(c)])
        return buf.getvalue()


def residual_histogram(residuals, bins: int = DEFAULT_BINS) -> Histogram:
    """Equal-width bins over the residual range; a constant residual ``r``
    gets the range ``[r - 0.5, r + 0.5]``. Counts sum to ``len(residuals)``."""
    r = np.asarray(residuals, dtype=np.float64)
    lo, hi = float(r.min()), float(r.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(r, bins=bins, range=(lo, hi))
    return Histogram(edges, counts)


def _save(fig, path: Path) -> None:
    with plt.rc_context({"svg.hashsalt": "millpdm", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8", newline="")
    return path


def correlation_heatmap(corr: CorrMatrix, out_dir, name: str = "corr") -> Figure:
    out_dir = Path(out_dir)
    k = len(corr.names)
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * k, 0.8 + 0.7 * k))
    im = ax.imshow(corr.values, cmap="coolwarm", vmin=-1, vmax=1)
    ax.set_xticks(range(k), corr.names, rotation=60, ha="right", fontsize=7)
    ax.set_yticks(range(k), corr.names, fontsize=7)
    for i in range(k):
        for j in range(k):
            ax.text(j, i, f"{corr.values[i, j]:.2f}", ha="center", va="center", fontsize=6)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title("Pearson correlation")
    fig.tight_layout()
    svg = out_dir / f"{name}.svg"
    _save(fig, svg)
    return Figure(name, svg, _write(out_dir / f"{name}.csv", corr.to_csv()))


def actual_vs_predicted(y_true, y_pred, out_dir, model: str = "", name: str = "actual_vs_predicted") -> Figure:
    out_dir = Path(out_dir)
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(y_true, y_pred, s=6, alpha=0.5)
    lo = float(min(y_true.min(), y_pred.min()))
    hi = float(max(y_true.max(), y_pred.max()))
    ax.plot([lo, hi], [lo, hi], color="black", linewidth=1, label="y = x")
    ax.set_xlabel("Actual")
    ax.set_ylabel("Predicted")
    ax.set_title(f"Actual vs predicted ({model})" if model else "Actual vs predicted")
    ax.legend(loc="upper left")
    fig.tight_layout()
    svg = out_dir / f"{name}.svg"
    _save(fig, svg)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "actual", "predicted"])
    for i, (a, p) in enumerate(zip(y_true, y_pred)):
        writer.writerow([i, repr(float(a)), repr(float(p))])
    return Figure(name, svg, _write(out_dir / f"{name}.csv", buf.getvalue()))


def residual_plot(y_true, y_pred, out_dir, bins: int = DEFAULT_BINS, model: str = "", name: str = "residuals") -> Figure:
    out_dir = Path(out_dir)
    hist = residual_histogram(np.asarray(y_true, dtype=np.float64) - np.asarray(y_pred, dtype=np.float64), bins)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.stairs(hist.counts, hist.edges, fill=True, alpha=0.7)
    ax.axvline(0.0, color="black", linewidth=1)
    ax.set_xlabel("Residual (actual - predicted)")
    ax.set_ylabel("Count")
    ax.set_title(f"Residual distribution ({model})" if model else "Residual distribution")
    fig.tight_layout()
    svg = out_dir / f"{name}.svg"
    _save(fig, svg)
    return Figure(name, svg, _write(out_dir / f"{name}.csv", hist.to_csv()))


def shap_beeswarm(summary: SummaryTable, out_dir, name: str = "shap_summary", seed: int = 0) -> Figure:
    """One horizontal strip per feature (top = most important), points
    coloured by the feature value rank within that feature."""
    out_dir = Path(out_dir)
    order = list(summary.order)
    k = len(order)
    rng = np.random.default_rng(seed)
    fig, ax = plt.subplots(figsize=(7, 0.6 * k + 1.5))
    for pos, j in enumerate(order):
        phi = summary.values[:, j]
        x = summary.X[:, j]
        ranks = np.argsort(np.argsort(x, kind="stable"), kind="stable") / max(1, len(x) - 1)
        jitter = rng.uniform(-0.3, 0.3, size=len(phi))
        ax.scatter(phi, np.full(len(phi), k - 1 - pos) + jitter, c=ranks, cmap="coolwarm", s=5, vmin=0, vmax=1)
    ax.set_yticks(range(k), [summary.features[j] for j in reversed(order)])
    ax.axvline(0.0, color="grey", linewidth=0.8)
    ax.set_xlabel("SHAP value (impact on prediction)")
    ax.set_title("SHAP summary")
    fig.tight_layout()
    svg = out_dir / f"{name}.svg"
    _save(fig, svg)
    return Figure(name, svg, _write(out_dir / f"{name}.csv", summary.scatter_csv()))


def shap_dependence_plot(table: DependenceTable, out_dir, name: str = "shap_dependence") -> Figure:
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if table.interaction is not None:
        sc = ax.scatter(table.value, table.shap, c=table.interaction_value, cmap="coolwarm", s=6)
        fig.colorbar(sc, ax=ax, label=table.interaction)
    else:
        ax.scatter(table.value, table.shap, s=6)
    ax.set_xlabel(table.feature)
    ax.set_ylabel(f"SHAP value for {table.feature}")
    ax.set_title("SHAP dependence")
    fig.tight_layout()
    svg = out_dir / f"{name}.svg"
    _save(fig, svg)
    return Figure(name, svg, _write(out_dir / f"{name}.csv", table.to_csv()))
