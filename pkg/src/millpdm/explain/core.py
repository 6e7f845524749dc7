"""Shapley attributions under the interventional value function.

``v(S) = mean_b f(x_S, b_~S)`` over an explicit background sample ``b``.
Three routes compute the Shapley values of that game:

* :func:`shap_exact` enumerates all ``2^p`` coalitions (the oracle);
* :func:`shap_tree` walks tree paths per (query, background) pair;
* :func:`shap_kernel` solves the Shapley-kernel weighted least squares,
  exactly when every coalition is enumerated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import BudgetTooSmall, TooManyFeatures, WidthMismatch
from ._treeshap import ensemble_shap_values

CONDITIONING = "interventional"
MAX_EXACT_FEATURES = 15
MAX_ENUMERATED_FEATURES = 12
_PREDICT_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class Background:
    """Reference rows for the value function."""

    rows: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        if rows.shape[0] == 0:
            raise ValueError("background needs at least one row")
        object.__setattr__(self, "rows", rows)

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    def base_value(self, model) -> float:
        return float(np.mean(model.predict(self.rows)))


def make_background(X, size: int = 100, seed: int = 42) -> Background:
    """Seeded draw of ``size`` distinct rows (all rows when ``size >= n``)."""
    X = np.asarray(X, dtype=np.float64)
    if size >= X.shape[0]:
        return Background(X.copy(), seed)
    idx = np.sort(np.random.default_rng(seed).choice(X.shape[0], size=size, replace=False))
    return Background(X[idx], seed)


def _as_background(bg) -> Background:
    return bg if isinstance(bg, Background) else Background(bg)


@dataclass
class ShapVector:
    values: np.ndarray
    base_value: float
    prediction: float
    feature_names: list[str]
    x: np.ndarray | None = None
    method: str = ""
    conditioning: str = CONDITIONING


@dataclass
class ShapMatrix:
    values: np.ndarray
    base_value: float
    predictions: np.ndarray
    feature_names: list[str]
    method: str
    background_size: int
    conditioning: str = CONDITIONING
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.values.shape[0]

    def row(self, i: int, x=None) -> ShapVector:
        return ShapVector(
            values=self.values[i],
            base_value=self.base_value,
            prediction=float(self.predictions[i]),
            feature_names=self.feature_names,
            x=None if x is None else np.asarray(x),
            method=self.method,
            conditioning=self.conditioning,
        )

    def efficiency_gap(self) -> np.ndarray:
        return np.abs(self.base_value + self.values.sum(axis=1) - self.predictions)


def _is_single(X) -> bool:
    return np.ndim(X) == 1


def _finish(out: ShapMatrix, X, single: bool):
    return out.row(0, X[0]) if single else out


def _check_width(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise WidthMismatch(f"model expects {model.n_features} features, got {X.shape[1]}")
    return X


def _composites(x: np.ndarray, masks: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Rows ``(x_S, z_~S)`` for every mask ``S`` and background row ``z``."""
    M, nb = masks.shape[0], Z.shape[0]
    out = np.broadcast_to(Z, (M, nb, Z.shape[1])).copy()
    sel = np.broadcast_to(masks[:, None, :], out.shape)
    out[sel] = np.broadcast_to(x, out.shape)[sel]
    return out.reshape(M * nb, Z.shape[1])


def _coalition_values(model, x, masks, Z) -> np.ndarray:
    """``v(S)`` for each row of ``masks``, by averaging predictions."""
    nb = Z.shape[0]
    per_chunk = max(1, _PREDICT_CHUNK // nb)
    out = np.empty(masks.shape[0])
    for s in range(0, masks.shape[0], per_chunk):
        m = masks[s : s + per_chunk]
        preds = model.predict(_composites(x, m, Z)).reshape(m.shape[0], nb)
        out[s : s + per_chunk] = preds.mean(axis=1)
    return out


def value_function(model, x, S, bg) -> float:
    """Interventional coalition value: features in ``S`` from ``x``, the
    rest from each background row, predictions averaged."""
    bg = _as_background(bg)
    x = _check_width(model, x)[0]
    p = x.shape[0]
    mask = np.zeros(p, dtype=bool)
    mask[list(S)] = True
    if mask.all():
        return float(model.predict(x[None, :])[0])
    if not mask.any():
        return bg.base_value(model)
    return float(_coalition_values(model, x, mask[None, :], bg.rows)[0])


def _all_masks(p: int) -> np.ndarray:
    codes = np.arange(1 << p)
    return ((codes[:, None] >> np.arange(p)) & 1).astype(bool)


def shap_exact(model, X, bg, feature_names=None) -> ShapMatrix | ShapVector:
    """Brute-force Shapley values over all ``2^p`` coalitions.

    ``phi_i = sum_{S not containing i} |S|! (p-|S|-1)! / p! [v(S+i) - v(S)]``.
    """
    bg = _as_background(bg)
    single = _is_single(X)
    X = _check_width(model, X)
    p = X.shape[1]
    if p > MAX_EXACT_FEATURES:
        raise TooManyFeatures(f"exact enumeration is limited to {MAX_EXACT_FEATURES} features, got {p}")
    masks = _all_masks(p)
    sizes = masks.sum(axis=1)
    weight = np.array([math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) for s in range(p)])
    codes = np.arange(1 << p)
    full = (1 << p) - 1
    base = bg.base_value(model)
    preds = model.predict(X)
    phi = np.zeros((X.shape[0], p))
    for q, x in enumerate(X):
        v = _coalition_values(model, x, masks, bg.rows)
        v[0] = base
        v[full] = preds[q]
        for i in range(p):
            without = codes[(codes >> i) & 1 == 0]
            phi[q, i] = np.sum(weight[sizes[without]] * (v[without | (1 << i)] - v[without]))
    return _finish(ShapMatrix(phi, base, preds, _names(model, feature_names), "exact", bg.size), X, single)


def shap_tree(model, X, bg, feature_names=None) -> ShapMatrix | ShapVector:
    """Tree-path computation of the same quantity as :func:`shap_exact`."""
    bg = _as_background(bg)
    trees, weights, _ = model.tree_ensemble()  # raises NotATreeModel
    single = _is_single(X)
    X = _check_width(model, X)
    phi = ensemble_shap_values(trees, weights, X, bg.rows)
    out = ShapMatrix(phi, bg.base_value(model), model.predict(X), _names(model, feature_names), "tree", bg.size)
    return _finish(out, X, single)


def _kernel_weight(p: int, s: np.ndarray) -> np.ndarray:
    comb = np.array([math.comb(p, int(k)) for k in s], dtype=np.float64)
    return (p - 1) / (comb * s * (p - s))


def _sample_masks(p: int, budget: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Coalitions drawn with size ~ Shapley kernel, paired with complements."""
    sizes = np.arange(1, p)
    size_prob = (p - 1) / (sizes * (p - sizes))
    size_prob /= size_prob.sum()
    masks = []
    while len(masks) < budget:
        k = int(rng.choice(sizes, p=size_prob))
        m = np.zeros(p, dtype=bool)
        m[rng.choice(p, size=k, replace=False)] = True
        masks.append(m)
        if len(masks) < budget:
            masks.append(~m)
    return np.array(masks), np.ones(len(masks))


def shap_kernel(model, X, bg, budget: int | None = None, seed: int = 42, feature_names=None) -> ShapMatrix | ShapVector:
    """Kernel SHAP: weighted least squares over coalitions with the
    efficiency constraint eliminated analytically.

    With ``p <= 12`` and no smaller ``budget`` all ``2^p - 2`` proper
    coalitions are enumerated and the solution equals the exact values.
    """
    bg = _as_background(bg)
    single = _is_single(X)
    X = _check_width(model, X)
    p = X.shape[1]
    n_proper = (1 << p) - 2
    if budget is not None and budget < p + 2:
        raise BudgetTooSmall(f"need at least p + 2 = {p + 2} coalitions, got {budget}")
    enumerate_all = p <= MAX_ENUMERATED_FEATURES and (budget is None or budget >= n_proper)
    if enumerate_all:
        masks = _all_masks(p)[1:-1]
        w = _kernel_weight(p, masks.sum(axis=1))
        method = "kernel"
    else:
        masks, w = _sample_masks(p, budget if budget is not None else 2 * p + 2048, np.random.default_rng(seed))
        method = "kernel-sampled"
    Zm = masks.astype(np.float64)
    base = bg.base_value(model)
    preds = model.predict(X)
    # phi_last = delta - sum(others): regress on z_i - z_last
    A = Zm[:, :-1] - Zm[:, -1:]
    sw = np.sqrt(w)
    phi = np.zeros((X.shape[0], p))
    for q, x in enumerate(X):
        v = _coalition_values(model, x, masks, bg.rows)
        delta = preds[q] - base
        target = v - base - Zm[:, -1] * delta
        coef, *_ = np.linalg.lstsq(A * sw[:, None], target * sw, rcond=None)
        phi[q, :-1] = coef
        phi[q, -1] = delta - coef.sum()
    return _finish(ShapMatrix(phi, base, preds, _names(model, feature_names), method, bg.size), X, single)


def explain(model, X, bg, method: str = "auto", feature_names=None, **kwargs) -> ShapMatrix:
    """Dispatch to the tree, kernel or exact route (``auto``: tree if possible)."""
    if method == "auto":
        method = "tree" if model.is_tree_model else "kernel"
    if method == "tree":
        return shap_tree(model, X, bg, feature_names)
    if method == "kernel":
        return shap_kernel(model, X, bg, feature_names=feature_names, **kwargs)
    if method == "exact":
        return shap_exact(model, X, bg, feature_names)
    raise ValueError(f"unknown SHAP method {method!r}")


def _names(model, feature_names):
    return list(feature_names) if feature_names is not None else list(model.feature_names)


__all__ = [
    "Background",
    "CONDITIONING",
    "ShapMatrix",
    "ShapVector",
    "explain",
    "make_background",
    "shap_exact",
    "shap_kernel",
    "shap_tree",
    "value_function",
]
