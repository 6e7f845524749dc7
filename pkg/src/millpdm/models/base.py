from __future__ import annotations

import numpy as np

from ..errors import DegenerateData, NonFiniteInput, NotATreeModel, WidthMismatch
from .config import ModelConfig

_REGISTRY: dict[str, type["TrainedModel"]] = {}


def register(*families):
    def deco(cls):
        for fam in families:
            _REGISTRY[fam] = cls
        return cls

    return deco


def model_class(family: str) -> type["TrainedModel"]:
    return _REGISTRY[family]


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise DegenerateData(f"feature matrix must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise DegenerateData(f"cannot fit on an empty matrix of shape {X.shape}")
    if y.ndim != 1 or len(y) != X.shape[0]:
        raise DegenerateData(f"target length {y.shape} does not match {X.shape[0]} rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise NonFiniteInput("training data contains NaN or infinite values")
    return X, y


class TrainedModel:
    """Fitted state of one learner.

    Subclasses implement ``_predict`` and the ``_state``/``_from_state``
    pair used by JSON serialization.
    """

    family: str

    def __init__(self, config: ModelConfig, n_features: int, feature_names=None, meta=None):
        self.config = config
        self.family = config.family
        self.n_features = n_features
        self.feature_names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(n_features)]
        self.meta = dict(meta or {})

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise WidthMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self._predict(X)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tree_ensemble(self):
        """``(trees, weights, base)`` with ``f(x) = base + sum_t w_t tree_t(x)``."""
        raise NotATreeModel(f"{self.family} is not an additive tree model")

    @property
    def is_tree_model(self) -> bool:
        try:
            self.tree_ensemble()
        except NotATreeModel:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "format": "millpdm-model",
            "version": 1,
            "family": self.family,
            "config": self.config.to_dict(),
            "n_features": self.n_features,
            "feature_names": self.feature_names,
            "meta": self.meta,
            "state": self._state(),
        }

    def _state(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _from_state(cls, config, n_features, feature_names, meta, state):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(family={self.family!r}, n_features={self.n_features})"


def model_from_dict(d: dict) -> TrainedModel:
    config = ModelConfig.from_dict(d["config"])
    cls = model_class(d["family"])
    return cls._from_state(config, d["n_features"], d["feature_names"], d.get("meta", {}), d["state"])
