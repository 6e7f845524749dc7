"""Staged workflow: preprocess, train, evaluate, select, tune, explain,
fault classification and figures, each persisting its artifacts.

Numeric artifacts (metrics, SHAP values, models) are written with sorted
keys and ``repr`` floats and never contain timings, so identical configs
give identical bytes whatever the worker count. Timings live only in the
manifest.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .dataset import (
    FAULT_LABELS,
    FEATURE_NAMES,
    Dataset,
    Standardizer,
    apply_standardizer,
    derive_target,
    fit_standardizer,
    kfold,
    load_ai4i,
    train_test_split,
)
from .errors import InvalidConfig, MissingArtifact, PdmError, StageError
from .explain import ShapMatrix, explain, make_background, shap_dependence, shap_summary
from .metrics import EvalReport, classification_metrics, rank_models, regression_metrics, reports_to_csv, reports_to_json
from .models import DISPLAY_NAMES, ENSEMBLE_FAMILIES, FAMILIES, ModelConfig, fit, fit_multilabel, load_model, predict_multilabel, save_model
from .simulate import simulate_ai4i
from .stats import pearson_matrix
from .tuning import SearchSpace, TuningResult, grid_search, random_search

logger = logging.getLogger(__name__)

OUT_ENV = "MILLPDM_OUT"
STAGES = ("preprocess", "train", "evaluate", "select", "tune", "explain", "faults", "figures")
REGRESSION_TARGETS = ("severity", "binary")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- config


@dataclass
class TuneSettings:
    enabled: bool = True
    family: str = "regularized_boosting"
    method: str = "grid"
    k: int = 5
    budget: int = 20
    seed: int = 42
    stratify: bool = True
    grid: dict = field(default_factory=lambda: {"n_estimators": [100, 150], "max_depth": [3, 6]})
    fixed: dict = field(default_factory=lambda: {"learning_rate": 0.1, "subsample": 0.8, "colsample_bytree": 0.7})


@dataclass
class ShapSettings:
    enabled: bool = True
    method: str = "auto"
    background: int = 100
    queries: int = 500
    seed: int = 42
    kernel_budget: int | None = None
    dependence: list = field(default_factory=lambda: ["Rotational speed [rpm]", "Torque [Nm]"])


@dataclass
class FaultSettings:
    enabled: bool = True
    family: str | None = None  # None: best-ranked ensemble
    threshold: float = 0.5


@dataclass
class RunConfig:
    """Everything a run depends on. ``data = None`` selects the built-in
    AI4I-style generator (``simulate_rows`` rows, ``simulate_seed``)."""

    data: str | None = None
    simulate_rows: int = 10000
    simulate_seed: int = 2020
    target: str = "severity"
    test_fraction: float = 0.2
    seed: int = 42
    models: list = field(default_factory=lambda: list(FAMILIES))
    params: dict = field(default_factory=dict)
    tune: TuneSettings = field(default_factory=TuneSettings)
    shap: ShapSettings = field(default_factory=ShapSettings)
    faults: FaultSettings = field(default_factory=FaultSettings)
    bins: int = 30
    out_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.target not in REGRESSION_TARGETS:
            raise InvalidConfig(f"target must be one of {REGRESSION_TARGETS}, got {self.target!r}")
        unknown = [m for m in self.models if m not in FAMILIES]
        if unknown or not self.models:
            raise InvalidConfig(f"unknown or empty model roster {unknown or self.models}")
        if self.tune.method not in ("grid", "random"):
            raise InvalidConfig(f"tune.method must be grid or random, got {self.tune.method!r}")
        if self.shap.method not in ("auto", "tree", "kernel", "exact"):
            raise InvalidConfig(f"unknown shap.method {self.shap.method!r}")
        if self.threads < 1:
            raise InvalidConfig("threads must be >= 1")
        for fam, overrides in self.params.items():
            ModelConfig.create(fam, seed=self.seed, **overrides)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        nested = {"tune": TuneSettings, "shap": ShapSettings, "faults": FaultSettings}
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise InvalidConfig(f"unknown config key(s) {sorted(extra)}")
        for key, sub in nested.items():
            if key in d and not isinstance(d[key], sub):
                sub_names = {f.name for f in dataclasses.fields(sub)}
                bad = set(d[key]) - sub_names
                if bad:
                    raise InvalidConfig(f"unknown {key} key(s) {sorted(bad)}")
                d[key] = sub(**d[key])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise MissingArtifact(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def config_hash(self) -> str:
        """SHA-256 of the canonical config, ignoring threads and output dir."""
        d = self.to_dict()
        d.pop("threads")
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def model_config(self, family: str) -> ModelConfig:
        return ModelConfig.create(family, seed=self.seed, **self.params.get(family, {}))


def resolve_out_dir(cli_value: str | None, default: str = "out") -> Path:
    """Command-line value, else ``$MILLPDM_OUT``, else ``default``."""
    return Path(cli_value or os.environ.get(OUT_ENV) or default)


# ------------------------------------------------------------- workspace


class Workspace:
    """Output directory holding every stage's artifacts."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.root / name

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8", newline="")
        return p

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, _dump(obj))

    def require(self, name: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise MissingArtifact(f"{p} not found; run the stage that produces it first")
        return p

    def read_json(self, name: str):
        return json.loads(self.require(name).read_text())

    def model_path(self, family: str) -> str:
        return f"models/{family}.json"


# ---------------------------------------------------------------- stages


@dataclass
class Prepared:
    dataset: Dataset
    X: np.ndarray
    Xs: np.ndarray
    y: np.ndarray
    train: np.ndarray
    test: np.ndarray
    scaler: Standardizer
    source: dict

    @property
    def feature_names(self) -> list[str]:
        return list(FEATURE_NAMES)


def load_source(data: str | None, simulate_rows: int = 10000, simulate_seed: int = 2020) -> tuple[Dataset, dict]:
    if data is None:
        return simulate_ai4i(simulate_rows, simulate_seed), {"kind": "simulated", "rows": simulate_rows, "seed": simulate_seed}
    if not Path(data).is_file():
        raise MissingArtifact(f"data file {data} not found")
    raw = Path(data).read_bytes()
    d = load_ai4i(data)
    return d, {"kind": "file", "path": str(data), "sha256": hashlib.sha256(raw).hexdigest()}


def _prepare(d: Dataset, source: dict, target: str, test_fraction: float, seed: int) -> Prepared:
    X = d.features
    y = derive_target(d, target)
    train, test = train_test_split(d, test_fraction, seed)
    scaler = fit_standardizer(X, train)
    return Prepared(d, X, apply_standardizer(scaler, X), y, train, test, scaler, source)


def stage_preprocess(ws: Workspace, cfg: RunConfig) -> Prepared:
    d, source = load_source(cfg.data, cfg.simulate_rows, cfg.simulate_seed)
    prep = _prepare(d, source, cfg.target, cfg.test_fraction, cfg.seed)
    ingest = {
        "source": source,
        "rows": d.rows,
        "id_column": d.id_column,
        "target": cfg.target,
        "test_fraction": cfg.test_fraction,
        "seed": cfg.seed,
        "n_train": int(len(prep.train)),
        "n_test": int(len(prep.test)),
        "label_counts": {c: int(v) for c, v in zip(("Machine failure",) + FAULT_LABELS, d.label_matrix().sum(axis=0))},
        "target_counts": {repr(float(k)): int(v) for k, v in zip(*np.unique(prep.y, return_counts=True))},
    }
    ws.write_json("ingest.json", ingest)
    ws.write_json("split.json", {"seed": cfg.seed, "test_fraction": cfg.test_fraction, "train": prep.train.tolist(), "test": prep.test.tolist()})
    ws.write_json("standardizer.json", prep.scaler.to_dict())
    return prep


def load_prepared(ws: Workspace) -> Prepared:
    """Rebuild the preprocessing state from ``ingest.json``."""
    info = ws.read_json("ingest.json")
    src = info["source"]
    if src["kind"] == "simulated":
        d, source = load_source(None, src["rows"], src["seed"])
    else:
        d, source = load_source(src["path"])
    return _prepare(d, source, info["target"], info["test_fraction"], info["seed"])


def stage_train(ws: Workspace, prep: Prepared, configs: dict[str, ModelConfig], threads: int = 1) -> dict:
    models = {}
    for fam, config in configs.items():
        t0 = time.perf_counter()
        model = fit(config, prep.Xs[prep.train], prep.y[prep.train], prep.feature_names, threads=threads)
        save_model(model, ws.path(ws.model_path(fam)))
        logger.info("trained %s in %.2fs", fam, time.perf_counter() - t0)
        models[fam] = model
    return models


def stage_evaluate(ws: Workspace, prep: Prepared, models: dict) -> list[EvalReport]:
    reports = []
    for fam, model in models.items():
        pred = model.predict(prep.Xs[prep.test])
        reports.append(regression_metrics(prep.y[prep.test], pred, model=fam, split="test"))
    ranked = rank_models(reports)
    ws.write_text("metrics.json", reports_to_json(ranked))
    ws.write_text("metrics.csv", reports_to_csv(ranked))
    return ranked


@dataclass
class Selection:
    best: str
    best_ensemble: str | None
    ranking: list[str]

    def to_dict(self) -> dict:
        return {
            "best": self.best,
            "best_display": DISPLAY_NAMES[self.best],
            "best_ensemble": self.best_ensemble,
            "ranking": self.ranking,
        }


def stage_select(ws: Workspace, ranked: list[EvalReport]) -> Selection:
    ranking = [r.model for r in rank_models(ranked)]
    ensembles = [m for m in ranking if m in ENSEMBLE_FAMILIES]
    sel = Selection(ranking[0], ensembles[0] if ensembles else None, ranking)
    ws.write_json("selection.json", sel.to_dict())
    return sel


def stage_tune(ws: Workspace, prep: Prepared, settings: TuneSettings, seed: int, threads: int = 1) -> TuningResult:
    space = SearchSpace(settings.family, settings.grid, {**settings.fixed, "seed": seed}, settings.budget)
    X, y = prep.X[prep.train], prep.y[prep.train]
    plan = kfold(len(y), settings.k, settings.seed, stratify=y if settings.stratify else None, stratify_name="target" if settings.stratify else None)
    if settings.method == "grid":
        result = grid_search(space, X, y, plan, threads=threads)
    else:
        result = random_search(space, X, y, plan, seed=settings.seed, budget=settings.budget, threads=threads)
    ws.write_text("tuning.json", result.to_json())
    ws.write_text("tuning.csv", result.to_csv())
    return result


def shap_queries(prep: Prepared, n: int, seed: int) -> np.ndarray:
    """Sorted dataset row indices of up to ``n`` seeded test rows."""
    if n >= len(prep.test):
        return prep.test.copy()
    return np.sort(np.random.default_rng(seed).choice(prep.test, size=n, replace=False))


def shap_to_csv(matrix: ShapMatrix, rows: np.ndarray, X_raw: np.ndarray) -> str:
    """Long format ``row, feature, value, shap``; value in original units."""
    lines = ["row,feature,value,shap"]
    for q, r in enumerate(rows):
        for j, name in enumerate(matrix.feature_names):
            lines.append(f"{int(r)},{name},{float(X_raw[q, j])!r},{float(matrix.values[q, j])!r}")
    return "\n".join(lines) + "\n"


def shap_from_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """Inverse of :func:`shap_to_csv`: (rows, values, raw X, feature names)."""
    frame = pd.read_csv(path, dtype={"row": np.int64, "feature": str, "value": np.float64, "shap": np.float64}, float_precision="round_trip")
    names = list(dict.fromkeys(frame["feature"]))
    rows = np.asarray(list(dict.fromkeys(frame["row"])), dtype=np.int64)
    p = len(names)
    return rows, frame["shap"].to_numpy().reshape(-1, p), frame["value"].to_numpy().reshape(-1, p), names


def stage_explain(ws: Workspace, prep: Prepared, model, settings: ShapSettings) -> tuple[ShapMatrix, np.ndarray]:
    bg = make_background(prep.Xs[prep.train], settings.background, settings.seed)
    rows = shap_queries(prep, settings.queries, settings.seed)
    method = settings.method
    if method == "auto":
        method = "tree" if model.is_tree_model else "kernel"
    kwargs = {"budget": settings.kernel_budget, "seed": settings.seed} if method == "kernel" else {}
    matrix = explain(model, prep.Xs[rows], bg, method=method, feature_names=prep.feature_names, **kwargs)
    matrix.meta.update({"model": model.family, "background_seed": settings.seed, "query_seed": settings.seed})
    summary = shap_summary(matrix, prep.X[rows])
    ws.write_text("shap.csv", shap_to_csv(matrix, rows, prep.X[rows]))
    info = summary.to_dict()
    info.update(
        {
            "model": model.family,
            "background_size": matrix.background_size,
            "background_seed": settings.seed,
            "queries": int(len(rows)),
            "max_efficiency_gap": float(matrix.efficiency_gap().max()),
        }
    )
    ws.write_json("shap_summary.json", info)
    return matrix, rows


def stage_faults(ws: Workspace, prep: Prepared, config: ModelConfig, threshold: float = 0.5, threads: int = 1) -> dict:
    Y = derive_target(prep.dataset, "multilabel")
    m = fit_multilabel(config, prep.Xs[prep.train], Y[prep.train], prep.feature_names, threads=threads)
    save_model(m, ws.path(f"models/faults_{config.family}.json"))
    pred = predict_multilabel(m, prep.Xs[prep.test], threshold)
    per_label = classification_metrics(Y[prep.test].astype(np.int64), pred, list(FAULT_LABELS))
    out = {
        "family": config.family,
        "threshold": threshold,
        "labels": {k: dataclasses.asdict(v) for k, v in per_label.items()},
    }
    ws.write_json("faults.json", out)
    return per_label


def emit_figures(ws: Workspace, prep: Prepared | None = None, bins: int = 30, dependence=("Rotational speed [rpm]", "Torque [Nm]")) -> list:
    """Render every figure whose inputs exist in the workspace."""
    from . import plots

    prep = prep or load_prepared(ws)
    figures = [plots.correlation_heatmap(pearson_matrix(prep.dataset), ws.root)]
    sel = ws.read_json("selection.json")
    model = load_model(ws.require(ws.model_path(sel["best"])))
    y_true = prep.y[prep.test]
    y_pred = model.predict(prep.Xs[prep.test])
    label = DISPLAY_NAMES[sel["best"]]
    figures.append(plots.actual_vs_predicted(y_true, y_pred, ws.root, label))
    figures.append(plots.residual_plot(y_true, y_pred, ws.root, bins, label))
    if ws.path("shap.csv").exists():
        rows, values, X_raw, names = shap_from_csv(ws.path("shap.csv"))
        info = ws.read_json("shap_summary.json")
        explained = model if info["model"] == sel["best"] else load_model(ws.require(ws.model_path(info["model"])))
        preds = explained.predict(prep.Xs[rows])
        matrix = ShapMatrix(values, info["base_value"], preds, names, info["method"], info["background_size"])
        figures.append(plots.shap_beeswarm(shap_summary(matrix, X_raw), ws.root))
        feature, interaction = (list(dependence) + [None])[:2]
        figures.append(plots.shap_dependence_plot(shap_dependence(matrix, X_raw, feature, interaction), ws.root))
    return figures


# -------------------------------------------------------------- pipeline


@dataclass
class RunManifest:
    version: str
    config_hash: str
    config: dict
    stages: dict = field(default_factory=dict)
    status: str = "running"
    failed_stage: str | None = None
    error: str | None = None

    def artifacts(self) -> list[str]:
        return [a for s in self.stages.values() for a in s["artifacts"]]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _listing(ws: Workspace, before: dict) -> list[str]:
    now = {str(p.relative_to(ws.root)): p.stat().st_mtime_ns for p in ws.root.rglob("*") if p.is_file()}
    return sorted(k for k, v in now.items() if k != "manifest.json" and before.get(k) != v)


def _snapshot(ws: Workspace) -> dict:
    return {str(p.relative_to(ws.root)): p.stat().st_mtime_ns for p in ws.root.rglob("*") if p.is_file()}


def run_pipeline(cfg: RunConfig, out_dir=None) -> RunManifest:
    """Run every stage in order; on failure the manifest records the
    failed stage and the artifacts written so far, then ``StageError``
    is raised."""
    ws = Workspace(out_dir if out_dir is not None else cfg.out_dir)
    manifest = RunManifest(__version__, cfg.config_hash(), cfg.to_dict())
    manifest.config.pop("threads")
    manifest.config.pop("out_dir")
    state: dict = {}

    def preprocess():
        state["prep"] = stage_preprocess(ws, cfg)

    def train():
        configs = {fam: cfg.model_config(fam) for fam in cfg.models}
        state["models"] = stage_train(ws, state["prep"], configs, cfg.threads)

    def evaluate():
        state["reports"] = stage_evaluate(ws, state["prep"], state["models"])

    def select():
        state["selection"] = stage_select(ws, state["reports"])

    def tune():
        if cfg.tune.enabled:
            stage_tune(ws, state["prep"], cfg.tune, cfg.seed, cfg.threads)

    def explain_():
        if cfg.shap.enabled:
            stage_explain(ws, state["prep"], state["models"][state["selection"].best], cfg.shap)

    def faults():
        if cfg.faults.enabled:
            fam = cfg.faults.family or state["selection"].best_ensemble or state["selection"].best
            stage_faults(ws, state["prep"], cfg.model_config(fam), cfg.faults.threshold, cfg.threads)

    def figures():
        emit_figures(ws, state["prep"], cfg.bins, cfg.shap.dependence)

    steps = dict(zip(STAGES, (preprocess, train, evaluate, select, tune, explain_, faults, figures)))
    for name, step in steps.items():
        before = _snapshot(ws)
        t0 = time.perf_counter()
        try:
            step()
        except PdmError as exc:
            manifest.stages[name] = {"artifacts": _listing(ws, before), "seconds": time.perf_counter() - t0}
            manifest.status = "failed"
            manifest.failed_stage = name
            manifest.error = f"{type(exc).__name__}: {exc}"
            ws.write_json("manifest.json", manifest.to_dict())
            raise StageError(name, exc) from exc
        manifest.stages[name] = {"artifacts": _listing(ws, before), "seconds": time.perf_counter() - t0}
        logger.info("stage %s done in %.2fs", name, manifest.stages[name]["seconds"])
    manifest.status = "ok"
    ws.write_json("manifest.json", manifest.to_dict())
    return manifest
