"""Binary regression trees stored as flat arrays.

One builder serves every tree family. It grows splits from first and
second order statistics (``grad``, ``hess``): leaf weight ``-G / (H + lam)``
and split gain ``0.5 * [GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)] - gamma``.
With ``hess = 1``, ``lam = 0``, ``gamma = 0`` and ``grad = -y`` this is
plain variance-reduction CART with mean-valued leaves. A node is split
whenever it is impure and the best gain is non-negative, so zero-gain
splits (as at the root of XOR) are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass(frozen=True, eq=False)
class Tree:
    """Array-encoded tree; node 0 is the root, ``feature == -1`` marks a leaf.

    A row goes left when ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def used_features(self) -> set[int]:
        return set(int(f) for f in self.feature if f != LEAF)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        rows = np.arange(X.shape[0])
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active[r] = self.feature[node[r]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "cover": self.cover.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
            cover=np.asarray(d["cover"], dtype=np.float64),
        )

    @classmethod
    def leaf(cls, value: float, cover: float = 1.0) -> "Tree":
        return cls(
            feature=np.array([LEAF]),
            threshold=np.array([0.0]),
            left=np.array([LEAF]),
            right=np.array([LEAF]),
            value=np.array([float(value)]),
            cover=np.array([float(cover)]),
        )


def _best_split(X, idx, g, h, features, lam, min_samples_leaf, min_child_weight):
    """Highest-scoring split of ``idx`` over ``features``.

    Returns ``(score, feature, threshold)`` where score is
    ``GL^2/(HL+lam) + GR^2/(HR+lam)``; ties keep the lowest feature index,
    then the lowest threshold.
    """
    n = len(idx)
    best = (-np.inf, LEAF, 0.0)
    if n < 2 * min_samples_leaf:
        return best
    G = g.sum()
    H = h.sum()
    counts = np.arange(1, n)
    size_ok = (counts >= min_samples_leaf) & (n - counts >= min_samples_leaf)
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        GL = np.cumsum(g[order])[:-1]
        HL = np.cumsum(h[order])[:-1]
        GR = G - GL
        HR = H - HL
        ok = size_ok & (xs[:-1] < xs[1:]) & (HL >= min_child_weight) & (HR >= min_child_weight)
        if not ok.any():
            continue
        score = np.where(ok, GL * GL / (HL + lam) + GR * GR / (HR + lam), -np.inf)
        pos = int(np.argmax(score))
        if score[pos] > best[0]:
            lo, hi = xs[pos], xs[pos + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (float(score[pos]), int(f), float(thr))
    return best


def build_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray | None = None,
    *,
    rows: np.ndarray | None = None,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    lam: float = 0.0,
    gamma: float = 0.0,
    min_child_weight: float = 0.0,
    features: np.ndarray | None = None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow a tree depth-first on ``rows`` of ``X``.

    ``features`` restricts the candidate columns for the whole tree;
    ``max_features`` additionally draws that many of them at every node
    (random-forest style, needs ``rng``).
    """
    X = np.asarray(X, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    hess = np.ones_like(grad) if hess is None else np.asarray(hess, dtype=np.float64)
    idx_all = np.arange(X.shape[0]) if rows is None else np.asarray(rows)
    allowed = np.arange(X.shape[1]) if features is None else np.sort(np.asarray(features))
    depth_cap = np.inf if max_depth is None else max_depth

    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def new_node(g, h):
        G, H = g.sum(), h.sum()
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(-G / (H + lam)) + 0.0 if H + lam > 0 else 0.0)  # + 0.0 folds -0.0
        cover.append(float(H))
        return len(feature) - 1

    root = new_node(grad[idx_all], hess[idx_all])
    stack = [(root, idx_all, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= depth_cap or len(idx) < 2:
            continue
        g, h = grad[idx], hess[idx]
        if max_features is not None and max_features < len(allowed):
            cand = np.sort(rng.choice(allowed, size=max_features, replace=False))
        else:
            cand = allowed
        score, f, thr = _best_split(X, idx, g, h, cand, lam, min_samples_leaf, min_child_weight)
        if f == LEAF:
            continue
        G, H = g.sum(), h.sum()
        if np.ptp(g) <= 1e-12 * max(1.0, float(np.abs(g).max())):
            continue  # pure node
        gain = 0.5 * (score - G * G / (H + lam)) - gamma
        # zero-gain splits of an impure node are kept (XOR needs one at
        # the root); the tolerance absorbs rounding in the gain itself
        tol = 1e-12 * (float(g @ g) / max(float(h.mean()), 1e-300))
        if gain < -tol:
            continue
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(grad[li], hess[li])
        right[node] = new_node(grad[ri], hess[ri])
        # push right first so the left subtree is expanded first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        cover=np.asarray(cover, dtype=np.float64),
    )


def fit_cart(X, y, *, max_depth=None, min_samples_leaf=1, rows=None, max_features=None, rng=None) -> Tree:
    """Variance-reduction regression tree with mean-valued leaves."""
    y = np.asarray(y, dtype=np.float64)
    return build_tree(
        X,
        -y,
        None,
        rows=rows,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        max_features=max_features,
        rng=rng,
    )
