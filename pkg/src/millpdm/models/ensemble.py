"""Tree-based learners: single CART, random forest and the two boosters."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .base import TrainedModel, register
from .tree import Tree, build_tree, fit_cart

logger = logging.getLogger(__name__)


class TreeEnsembleModel(TrainedModel):
    """``f(x) = base + sum_t weights[t] * trees[t](x)``."""

    def __init__(self, config, n_features, trees, weights, base, feature_names=None, meta=None):
        super().__init__(config, n_features, feature_names, meta)
        self.trees = list(trees)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.base = float(base)

    def tree_ensemble(self):
        return self.trees, self.weights, self.base

    def tree_predictions(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.stack([t.predict(X) for t in self.trees])

    def _predict(self, X):
        out = np.full(X.shape[0], self.base)
        for w, tree in zip(self.weights, self.trees):
            out += w * tree.predict(X)
        return out

    def _state(self):
        return {
            "base": self.base,
            "weights": self.weights.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def _from_state(cls, config, n_features, feature_names, meta, state):
        trees = [Tree.from_dict(t) for t in state["trees"]]
        return cls(config, n_features, trees, state["weights"], state["base"], feature_names, meta)


@register("cart")
class CartModel(TreeEnsembleModel):
    @classmethod
    def fit(cls, config, X, y, feature_names=None, threads=1):
        tree = fit_cart(X, y, max_depth=config.max_depth, min_samples_leaf=config.min_samples_leaf)
        return cls(config, X.shape[1], [tree], [1.0], 0.0, feature_names, {"n_nodes": tree.n_nodes})

    @property
    def tree(self) -> Tree:
        return self.trees[0]

    def _predict(self, X):
        return self.trees[0].predict(X)


@register("random_forest")
class ForestModel(TreeEnsembleModel):
    """Bagged CART trees averaged with equal weight.

    Tree ``t`` draws its bootstrap sample and per-split feature subsets
    from its own generator seeded ``seed + t``, so the fitted forest does
    not depend on how many workers grew it.
    """

    @classmethod
    def fit(cls, config, X, y, feature_names=None, threads=1):
        n, p = X.shape
        m = config.max_features if config.max_features is not None else max(1, p // 3)
        m = min(m, p)

        def grow(t):
            rng = np.random.default_rng(config.seed + t)
            rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
            return fit_cart(
                X,
                y,
                rows=np.sort(rows),
                max_depth=config.max_depth,
                min_samples_leaf=config.min_samples_leaf,
                max_features=m,
                rng=rng,
            )

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                trees = list(pool.map(grow, range(config.n_estimators)))
        else:
            trees = [grow(t) for t in range(config.n_estimators)]
        T = len(trees)
        meta = {"max_features": m, "n_nodes": int(sum(t.n_nodes for t in trees))}
        return cls(config, p, trees, np.full(T, 1.0 / T), 0.0, feature_names, meta)

    def _predict(self, X):
        return self.tree_predictions(X).mean(axis=0)


@register("gradient_boosting")
class GradientBoostingModel(TreeEnsembleModel):
    """Squared-loss gradient boosting: ``F0 = mean(y)``, each stage fits a
    CART tree to the current residuals and is added with shrinkage."""

    @classmethod
    def fit(cls, config, X, y, feature_names=None, threads=1):
        lr = config.learning_rate
        F = np.full(len(y), y.mean())
        base = float(y.mean())
        trees = []
        train_mse = [float(np.mean((y - F) ** 2))]
        for _ in range(config.n_estimators):
            tree = fit_cart(X, y - F, max_depth=config.max_depth, min_samples_leaf=config.min_samples_leaf)
            F = F + lr * tree.predict(X)
            trees.append(tree)
            train_mse.append(float(np.mean((y - F) ** 2)))
        meta = {"train_mse": train_mse}
        return cls(config, X.shape[1], trees, np.full(len(trees), lr), base, feature_names, meta)


@register("regularized_boosting")
class RegularizedBoostingModel(TreeEnsembleModel):
    """Second-order boosting with L2 leaf penalty and split penalty.

    Squared loss gives gradient ``F - y`` and unit Hessian. Each stage
    draws ``subsample`` of the rows without replacement and
    ``colsample_bytree`` of the columns from a generator seeded
    ``seed + stage``; at 1.0 the full, unshuffled sets are used.
    """

    @classmethod
    def fit(cls, config, X, y, feature_names=None, threads=1):
        n, p = X.shape
        lr = config.learning_rate
        base = float(y.mean())
        F = np.full(n, base)
        hess = np.ones(n)
        trees = []
        train_mse = [float(np.mean((y - F) ** 2))]
        n_rows = max(1, int(round(config.subsample * n)))
        n_cols = max(1, int(round(config.colsample_bytree * p)))
        for t in range(config.n_estimators):
            rng = np.random.default_rng(config.seed + t)
            rows = None if n_rows >= n else np.sort(rng.choice(n, size=n_rows, replace=False))
            cols = None if n_cols >= p else np.sort(rng.choice(p, size=n_cols, replace=False))
            tree = build_tree(
                X,
                F - y,
                hess,
                rows=rows,
                max_depth=config.max_depth,
                min_samples_leaf=config.min_samples_leaf,
                lam=config.reg_lambda,
                gamma=config.split_gamma,
                min_child_weight=config.min_child_weight,
                features=cols,
            )
            F = F + lr * tree.predict(X)
            trees.append(tree)
            train_mse.append(float(np.mean((y - F) ** 2)))
        meta = {"train_mse": train_mse}
        return cls(config, p, trees, np.full(len(trees), lr), base, feature_names, meta)
