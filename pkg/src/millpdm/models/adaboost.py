"""AdaBoost.R2 (Drucker, 1997) with linear loss."""

from __future__ import annotations

import numpy as np

from .base import TrainedModel, register
from .tree import Tree, fit_cart


def weighted_median(preds: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-column weighted median of ``preds`` (stages x rows).

    Takes the smallest prediction whose cumulative stage weight reaches
    half the total.
    """
    order = np.argsort(preds, axis=0, kind="stable")
    sorted_w = weights[order]
    cum = np.cumsum(sorted_w, axis=0)
    pick = (cum >= 0.5 * cum[-1]).argmax(axis=0)
    cols = np.arange(preds.shape[1])
    return preds[order[pick, cols], cols]


@register("adaboost_r2")
class AdaBoostModel(TrainedModel):
    def __init__(self, config, n_features, trees, stage_weights, feature_names=None, meta=None):
        super().__init__(config, n_features, feature_names, meta)
        self.trees = list(trees)
        self.stage_weights = np.asarray(stage_weights, dtype=np.float64)

    @classmethod
    def fit(cls, config, X, y, feature_names=None, threads=1):
        n = len(y)
        rng = np.random.default_rng(config.seed)
        w = np.full(n, 1.0 / n)
        trees, alphas, losses = [], [], []
        stop = "n_estimators"
        for _ in range(config.n_estimators):
            rows = np.sort(rng.choice(n, size=n, replace=True, p=w))
            tree = fit_cart(X, y, rows=rows, max_depth=config.max_depth, min_samples_leaf=config.min_samples_leaf)
            err = np.abs(tree.predict(X) - y)
            err_max = err.max()
            if err_max <= 0:
                # perfect stage: keep it and stop, weights carry no information
                trees.append(tree)
                alphas.append(1.0)
                losses.append(0.0)
                stop = "perfect_fit"
                break
            loss = err / err_max
            avg = float(w @ loss)
            if avg >= 0.5:
                stop = "weighted_loss>=0.5"
                if not trees:
                    trees.append(tree)
                    alphas.append(1.0)
                    losses.append(avg)
                break
            beta = avg / (1.0 - avg)
            if beta <= 0:
                trees.append(tree)
                alphas.append(1.0)
                losses.append(avg)
                stop = "perfect_fit"
                break
            trees.append(tree)
            alphas.append(config.learning_rate * np.log(1.0 / beta))
            losses.append(avg)
            w = w * beta ** ((1.0 - loss) * config.learning_rate)
            w /= w.sum()
        meta = {"stage_loss": losses, "stop_reason": stop}
        return cls(config, X.shape[1], trees, alphas, feature_names, meta)

    def stage_predictions(self, X) -> np.ndarray:
        return np.stack([t.predict(X) for t in self.trees])

    def _predict(self, X):
        if len(self.trees) == 1:
            return self.trees[0].predict(X)
        return weighted_median(self.stage_predictions(X), self.stage_weights)

    def _state(self):
        return {"stage_weights": self.stage_weights.tolist(), "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def _from_state(cls, config, n_features, feature_names, meta, state):
        trees = [Tree.from_dict(t) for t in state["trees"]]
        return cls(config, n_features, trees, state["stage_weights"], feature_names, meta)
