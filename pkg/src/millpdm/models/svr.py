"""epsilon-SVR with an RBF kernel, trained by sequential minimal optimization.

The dual is written over ``2n`` variables ``beta = (alpha, alpha*)`` with
signs ``s = (+1, ..., -1, ...)``::

    min 1/2 beta' Q beta + p' beta,   Q_ij = s_i s_j K(x_i, x_j)
    s.t. s' beta = 0, 0 <= beta <= C,  p = (eps - y, eps + y)

Working pairs are chosen by maximal violation for ``i`` and the
second-order rule for ``j``; iteration stops once the KKT gap
``max_{I_up} -s G - min_{I_low} -s G`` drops below ``tol``.
"""

from __future__ import annotations

import logging
import warnings
from collections import OrderedDict

import numpy as np

from ..errors import SvrNoConvergence
from .base import TrainedModel, register

logger = logging.getLogger(__name__)

TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d2)


class _KernelRows:
    """LRU cache of kernel matrix rows."""

    def __init__(self, X, gamma, capacity=1024):
        self.X = X
        self.gamma = gamma
        self.capacity = capacity
        self._rows = OrderedDict()

    def __call__(self, i: int) -> np.ndarray:
        row = self._rows.get(i)
        if row is not None:
            self._rows.move_to_end(i)
            return row
        row = np.exp(-self.gamma * ((self.X - self.X[i]) ** 2).sum(axis=1))
        self._rows[i] = row
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return row


def smo_solve(X, y, C=1.0, epsilon=0.1, gamma=None, tol=1e-3, max_iter=200_000):
    """Solve the epsilon-SVR dual.

    Returns ``(coef, intercept, info, beta)`` where ``coef = alpha - alpha*``
    per training row, ``f(x) = sum_i coef_i K(x_i, x) + intercept`` and
    ``beta`` is the stacked dual vector ``[alpha, alpha*]``. ``info`` holds
    the iteration count, final KKT gap and a ``converged`` flag; when the
    cap is hit the current iterate is returned with a warning.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    gamma = 1.0 / X.shape[1] if gamma is None else gamma
    krow = _KernelRows(X, gamma)
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    beta = np.zeros(2 * n)
    grad = np.concatenate([epsilon - y, epsilon + y])
    # K(x, x) = 1 for the RBF kernel

    it = 0
    gap = np.inf
    converged = False
    while it < max_iter:
        up = ((sign > 0) & (beta < C)) | ((sign < 0) & (beta > 0))
        low = ((sign > 0) & (beta > 0)) | ((sign < 0) & (beta < C))
        score = -sign * grad
        if not up.any() or not low.any():
            converged = True
            gap = 0.0
            break
        up_score = np.where(up, score, -np.inf)
        i = int(np.argmax(up_score))
        gmax = up_score[i]
        gmin = np.min(np.where(low, score, np.inf))
        gap = gmax - gmin
        if gap < tol:
            converged = True
            break

        Ki = krow(i % n)
        Ki2 = np.concatenate([Ki, Ki])
        b = gmax - score
        a = 2.0 - 2.0 * Ki2
        a = np.where(a > 0, a, TAU)
        cand = low & (b > 0)
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))

        Kj = krow(j % n)
        Kij = Ki[j % n]
        bi_old, bj_old = beta[i], beta[j]
        if sign[i] != sign[j]:
            quad = max(2.0 - 2.0 * Kij, TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = diff
            elif beta[i] < 0:
                beta[i] = 0.0
                beta[j] = -diff
            if diff > 0:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = C - diff
            elif beta[j] > C:
                beta[j] = C
                beta[i] = C + diff
        else:
            quad = max(2.0 - 2.0 * Kij, TAU)
            delta = (grad[i] - grad[j]) / quad
            total = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if total > C:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = total - C
            elif beta[j] < 0:
                beta[j] = 0.0
                beta[i] = total
            if total > C:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = total - C
            elif beta[i] < 0:
                beta[i] = 0.0
                beta[j] = total

        di = beta[i] - bi_old
        dj = beta[j] - bj_old
        # Q_ik = s_i s_k K(i, k): split into the alpha and alpha* halves
        upd = sign[i] * di * Ki + sign[j] * dj * Kj
        grad[:n] += upd
        grad[n:] -= upd
        it += 1

    if not converged:
        warnings.warn(
            f"SMO stopped at the iteration cap ({max_iter}) with KKT gap {gap:.3g} > tol {tol}",
            SvrNoConvergence,
            stacklevel=2,
        )

    # intercept from free variables, else the midpoint of the feasible interval
    sg = sign * grad
    free = (beta > 0) & (beta < C)
    if free.any():
        rho = sg[free].mean()
    else:
        ub_mask = ((sign > 0) & (beta >= C)) | ((sign < 0) & (beta <= 0))
        lb_mask = ((sign > 0) & (beta <= 0)) | ((sign < 0) & (beta >= C))
        ub = sg[ub_mask].min() if ub_mask.any() else np.inf
        lb = sg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb) if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    coef = beta[:n] - beta[n:]
    info = {"iterations": it, "kkt_gap": float(gap), "converged": bool(converged), "gamma": float(gamma)}
    return coef, float(-rho), info, beta


@register("svr")
class SvrModel(TrainedModel):
    def __init__(self, config, n_features, support, coef, intercept, gamma, feature_names=None, meta=None):
        super().__init__(config, n_features, feature_names, meta)
        self.support = np.asarray(support, dtype=np.float64).reshape(-1, n_features)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)
        self.gamma = float(gamma)

    @classmethod
    def fit(cls, config, X, y, feature_names=None, threads=1):
        coef, intercept, info, _ = smo_solve(
            X,
            y,
            C=config.C,
            epsilon=config.epsilon,
            gamma=config.kernel_gamma,
            tol=config.tol,
            max_iter=config.max_iter,
        )
        keep = coef != 0
        logger.info("SVR: %d support vectors, %d iterations, converged=%s", keep.sum(), info["iterations"], info["converged"])
        meta = {k: info[k] for k in ("iterations", "kkt_gap", "converged")}
        meta["n_support"] = int(keep.sum())
        return cls(config, X.shape[1], X[keep], coef[keep], intercept, info["gamma"], feature_names, meta)

    def _predict(self, X):
        out = np.empty(X.shape[0])
        step = max(1, 2_000_000 // max(1, len(self.coef) * self.n_features))
        for s in range(0, X.shape[0], step):
            out[s : s + step] = rbf_kernel(X[s : s + step], self.support, self.gamma) @ self.coef
        return out + self.intercept

    def _state(self):
        return {
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "gamma": self.gamma,
        }

    @classmethod
    def _from_state(cls, config, n_features, feature_names, meta, state):
        return cls(
            config,
            n_features,
            state["support"],
            state["coef"],
            state["intercept"],
            state["gamma"],
            feature_names,
            meta,
        )
