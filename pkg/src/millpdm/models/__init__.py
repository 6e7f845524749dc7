"""Eight regression learners behind one ``fit``/``predict`` surface."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..dataset import FAULT_LABELS
from ..errors import DegenerateData, ShapeMismatch
from . import adaboost, ensemble, knn, linear, svr  # noqa: F401  (registers families)
from .base import TrainedModel, check_training_data, model_class, model_from_dict
from .config import DISPLAY_NAMES, ENSEMBLE_FAMILIES, FAMILIES, TREE_FAMILIES, ModelConfig
from .tree import Tree, build_tree, fit_cart

__all__ = [
    "DISPLAY_NAMES",
    "ENSEMBLE_FAMILIES",
    "FAMILIES",
    "TREE_FAMILIES",
    "ModelConfig",
    "MultiLabelModel",
    "TrainedModel",
    "Tree",
    "build_tree",
    "fit",
    "fit_cart",
    "fit_multilabel",
    "load_model",
    "predict",
    "predict_multilabel",
    "save_model",
]


def fit(config: ModelConfig, X, y, feature_names=None, threads: int = 1) -> TrainedModel:
    """Train ``config.family`` on ``(X, y)``; deterministic for a fixed seed."""
    X, y = check_training_data(X, y)
    return model_class(config.family).fit(config, X, y, feature_names=feature_names, threads=threads)


def predict(model: TrainedModel, X) -> np.ndarray:
    return model.predict(X)


class MultiLabelModel:
    """One regressor per fault flag, all sharing one config."""

    def __init__(self, models, labels=FAULT_LABELS):
        if len(models) != len(labels):
            raise DegenerateData(f"{len(models)} sub-models for {len(labels)} labels")
        self.models = list(models)
        self.labels = tuple(labels)

    @property
    def config(self) -> ModelConfig:
        return self.models[0].config

    def scores(self, X) -> np.ndarray:
        return np.column_stack([m.predict(X) for m in self.models])

    def to_dict(self) -> dict:
        return {
            "format": "millpdm-multilabel",
            "version": 1,
            "labels": list(self.labels),
            "models": [m.to_dict() for m in self.models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MultiLabelModel":
        return cls([model_from_dict(m) for m in d["models"]], d["labels"])


def fit_multilabel(config: ModelConfig, X, Y, feature_names=None, threads: int = 1, labels=FAULT_LABELS) -> MultiLabelModel:
    """One-vs-rest fit: an independent regressor per flag column."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] != len(labels):
        raise ShapeMismatch(f"expected an n x {len(labels)} flag matrix, got shape {Y.shape}")

    def one(j):
        return fit(config, X, Y[:, j], feature_names=feature_names)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            models = list(pool.map(one, range(Y.shape[1])))
    else:
        models = [one(j) for j in range(Y.shape[1])]
    return MultiLabelModel(models, labels)


def predict_multilabel(m: MultiLabelModel, X, threshold: float = 0.5) -> np.ndarray:
    """0/1 flags: each sub-model's score compared against ``threshold``."""
    return (m.scores(X) >= threshold).astype(np.int64)


def save_model(model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), sort_keys=True) + "\n")
    return path


def load_model(path):
    d = json.loads(Path(path).read_text())
    if d.get("format") == "millpdm-multilabel":
        return MultiLabelModel.from_dict(d)
    return model_from_dict(d)
