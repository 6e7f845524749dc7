from __future__ import annotations

import numpy as np

from .base import TrainedModel, register

_CHUNK = 128


@register("knn")
class KnnModel(TrainedModel):
    """k-nearest-neighbour regressor (mean of the k closest targets).

    Distances are exact squared Euclidean differences, not the
    ``|a|^2 + |b|^2 - 2ab`` expansion, so ties and self-matches are stable;
    equal distances prefer the lower training row.
    """

    def __init__(self, config, n_features, X_train, y_train, feature_names=None, meta=None):
        super().__init__(config, n_features, feature_names, meta)
        self.X_train = np.asarray(X_train, dtype=np.float64)
        self.y_train = np.asarray(y_train, dtype=np.float64)

    @classmethod
    def fit(cls, config, X, y, feature_names=None, threads=1):
        return cls(config, X.shape[1], X.copy(), y.copy(), feature_names)

    def neighbors(self, X) -> np.ndarray:
        k = min(self.config.k, len(self.y_train))
        out = np.empty((X.shape[0], k), dtype=np.int64)
        for start in range(0, X.shape[0], _CHUNK):
            q = X[start : start + _CHUNK]
            d2 = ((q[:, None, :] - self.X_train[None, :, :]) ** 2).sum(axis=2)
            out[start : start + _CHUNK] = np.argsort(d2, axis=1, kind="stable")[:, :k]
        return out

    def _predict(self, X):
        return self.y_train[self.neighbors(X)].mean(axis=1)

    def _state(self):
        return {"X": self.X_train.tolist(), "y": self.y_train.tolist()}

    @classmethod
    def _from_state(cls, config, n_features, feature_names, meta, state):
        X = np.asarray(state["X"], dtype=np.float64).reshape(-1, n_features)
        return cls(config, n_features, X, state["y"], feature_names, meta)
