from __future__ import annotations

import logging

import numpy as np

from .base import TrainedModel, register

logger = logging.getLogger(__name__)


@register("linear")
class LinearModel(TrainedModel):
    def __init__(self, config, n_features, coef, intercept, feature_names=None, meta=None):
        super().__init__(config, n_features, feature_names, meta)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)

    @classmethod
    def fit(cls, config, X, y, feature_names=None, threads=1):
        A = np.column_stack([np.ones(X.shape[0]), X])
        gram = A.T @ A
        rhs = A.T @ y
        # normal equations unless the Gram matrix is (numerically) singular
        if np.linalg.matrix_rank(gram) == gram.shape[0] and np.linalg.cond(gram) < 1e12:
            beta = np.linalg.solve(gram, rhs)
            solver = "normal_equations"
        else:
            beta = np.linalg.pinv(A) @ y
            solver = "pseudo_inverse"
            logger.info("singular Gram matrix, using the Moore-Penrose pseudo-inverse")
        return cls(config, X.shape[1], beta[1:], beta[0], feature_names, {"solver": solver})

    def _predict(self, X):
        return X @ self.coef + self.intercept

    def _state(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def _from_state(cls, config, n_features, feature_names, meta, state):
        return cls(config, n_features, state["coef"], state["intercept"], feature_names, meta)
