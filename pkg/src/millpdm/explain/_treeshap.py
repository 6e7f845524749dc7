"""Interventional Shapley values for additive tree ensembles.

For one query ``x`` and one background row ``z`` the hybrid game
``g(S) = f(x_S, z_~S)`` of a single tree decomposes over leaves: a leaf
contributes ``v * 1[A subset S, B disjoint S]`` where ``A`` (``B``) are the
features whose splits on the leaf's path were decided by ``x`` (``z``)
where the two rows disagree. That indicator game has closed-form Shapley
values::

    i in A:  +v (|A|-1)! |B|! / (|A|+|B|)!
    i in B:  -v |A|! (|B|-1)! / (|A|+|B|)!

The traversal only branches at nodes where ``x`` and ``z`` part ways and
the split feature is still unassigned, so a pair costs far fewer than
``2^p`` evaluations. Averaging over background rows gives the
interventional SHAP values.
"""

from __future__ import annotations

import math
import os

import numba
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    # try OpenMP before TBB; older TBB builds only produce a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

_ENTER = 0
_EXIT = 1


def leaf_weight_table(p: int) -> np.ndarray:
    """``table[a, b] = (a-1)! b! / (a+b)!`` for ``a >= 1``."""
    table = np.zeros((p + 1, p + 1))
    for a in range(1, p + 1):
        for b in range(0, p + 1 - a):
            table[a, b] = math.factorial(a - 1) * math.factorial(b) / math.factorial(a + b)
    return table


@numba.njit(cache=True)
def _accumulate_pair(feature, threshold, left, right, value, root, x, z, weight, table, phi, state, stack_node, stack_tag, stack_kind):
    # stack_tag is the assignment made on entering a frame: -1 none,
    # f for "f joins A" (x side), p + f for "f joins B" (z side);
    # exit frames carry the feature to release
    p = x.shape[0]
    top = 0
    stack_node[0] = root
    stack_tag[0] = -1
    stack_kind[0] = _ENTER
    n_a = 0
    n_b = 0
    while top >= 0:
        node = stack_node[top]
        tag = stack_tag[top]
        kind = stack_kind[top]
        top -= 1
        if kind == _EXIT:
            if state[tag] == 1:
                n_a -= 1
            else:
                n_b -= 1
            state[tag] = 0
            continue
        if tag >= 0:
            if tag < p:
                state[tag] = 1
                n_a += 1
            else:
                state[tag - p] = 2
                n_b += 1
        f = feature[node]
        if f < 0:
            if n_a + n_b > 0:
                v = value[node] * weight
                wa = table[n_a, n_b] if n_a > 0 else 0.0
                wb = table[n_b, n_a] if n_b > 0 else 0.0
                for i in range(p):
                    s = state[i]
                    if s == 1:
                        phi[i] += v * wa
                    elif s == 2:
                        phi[i] -= v * wb
            continue
        thr = threshold[node]
        x_left = x[f] <= thr
        z_left = z[f] <= thr
        x_child = root + (left[node] if x_left else right[node])
        z_child = root + (left[node] if z_left else right[node])
        if x_left == z_left or state[f] == 1:
            top += 1
            stack_node[top] = x_child
            stack_tag[top] = -1
            stack_kind[top] = _ENTER
        elif state[f] == 2:
            top += 1
            stack_node[top] = z_child
            stack_tag[top] = -1
            stack_kind[top] = _ENTER
        else:
            top += 1
            stack_node[top] = 0
            stack_tag[top] = f
            stack_kind[top] = _EXIT
            top += 1
            stack_node[top] = z_child
            stack_tag[top] = p + f
            stack_kind[top] = _ENTER
            top += 1
            stack_node[top] = 0
            stack_tag[top] = f
            stack_kind[top] = _EXIT
            top += 1
            stack_node[top] = x_child
            stack_tag[top] = f
            stack_kind[top] = _ENTER


@numba.njit(parallel=True, cache=True)
def _ensemble_shap(feature, threshold, left, right, value, roots, weights, X, Z, table, max_stack):
    nq, p = X.shape
    nb = Z.shape[0]
    out = np.zeros((nq, p))
    for q in numba.prange(nq):
        phi = np.zeros(p)
        state = np.zeros(p, dtype=np.int64)
        stack_node = np.zeros(max_stack, dtype=np.int64)
        stack_tag = np.zeros(max_stack, dtype=np.int64)
        stack_kind = np.zeros(max_stack, dtype=np.int64)
        x = X[q]
        for b in range(nb):
            z = Z[b]
            for t in range(roots.shape[0]):
                _accumulate_pair(
                    feature, threshold, left, right, value, roots[t], x, z, weights[t], table, phi, state, stack_node, stack_tag, stack_kind
                )
        for i in range(p):
            out[q, i] = phi[i] / nb
    return out


def pack_trees(trees):
    """Concatenate tree arrays; children stay relative to each tree's root."""
    roots = np.cumsum([0] + [t.n_nodes for t in trees[:-1]]).astype(np.int64)
    feature = np.concatenate([t.feature for t in trees]).astype(np.int64)
    threshold = np.concatenate([t.threshold for t in trees]).astype(np.float64)
    left = np.concatenate([t.left for t in trees]).astype(np.int64)
    right = np.concatenate([t.right for t in trees]).astype(np.int64)
    value = np.concatenate([t.value for t in trees]).astype(np.float64)
    max_depth = max(t.depth for t in trees)
    return feature, threshold, left, right, value, roots, max_depth


def ensemble_shap_values(trees, weights, X, Z) -> np.ndarray:
    """``phi[q, i]``: weighted sum over trees, averaged over background rows."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    feature, threshold, left, right, value, roots, max_depth = pack_trees(trees)
    table = leaf_weight_table(X.shape[1])
    # each level adds at most 4 frames on top of the pending siblings
    max_stack = 4 * (max_depth + 2) + 8
    return _ensemble_shap(
        feature, threshold, left, right, value, roots, np.asarray(weights, dtype=np.float64), X, Z, table, max_stack
    )
