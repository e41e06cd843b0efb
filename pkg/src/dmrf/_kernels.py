"""Compiled inner loops for split scanning and tree routing.

A scan gathers one feature of a node's samples, sorts it, and walks the
sorted order once. Every position where the value strictly increases yields
the candidate threshold ``x <= v`` together with its impurity reduction.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def scan_gini(X, codes, idx, feature, n_classes, min_leaf):
    """Gini reductions for every admissible threshold of ``feature``.

    Children must hold at least ``min_leaf`` samples each. Class counts are
    tracked as exact integer sums of squares, so equal partitions give
    bit-identical reductions.
    """
    n = idx.shape[0]
    x = np.empty(n)
    c = np.empty(n, dtype=np.int64)
    for i in range(n):
        x[i] = X[idx[i], feature]
        c[i] = codes[idx[i]]
    order = np.argsort(x)
    total = np.zeros(n_classes, dtype=np.int64)
    for i in range(n):
        total[c[i]] += 1
    sq_right = 0
    for k in range(n_classes):
        sq_right += total[k] * total[k]
    parent = 1.0 - sq_right / (n * n)
    left = np.zeros(n_classes, dtype=np.int64)
    sq_left = 0
    thresholds = np.empty(max(n - 1, 0))
    reductions = np.empty(max(n - 1, 0))
    m = 0
    for i in range(n - 1):
        k = c[order[i]]
        nl_k = left[k]
        nr_k = total[k] - nl_k
        sq_left += 2 * nl_k + 1
        sq_right -= 2 * nr_k - 1
        left[k] = nl_k + 1
        xi = x[order[i]]
        if xi < x[order[i + 1]]:
            nl = i + 1
            nr = n - nl
            if nl >= min_leaf and nr >= min_leaf:
                gini_l = 1.0 - sq_left / (nl * nl)
                gini_r = 1.0 - sq_right / (nr * nr)
                thresholds[m] = xi
                reductions[m] = parent - (nl / n) * gini_l - (nr / n) * gini_r
                m += 1
    return thresholds[:m], reductions[:m]


@njit(cache=True)
def scan_mse(X, values, idx, feature, min_leaf, weighted):
    """MSE reductions for every admissible threshold of ``feature``.

    Unweighted mode returns ``MSE(parent) - MSE(left) - MSE(right)``;
    weighted mode scales each child term by its sample share.
    """
    n = idx.shape[0]
    x = np.empty(n)
    y = np.empty(n)
    for i in range(n):
        x[i] = X[idx[i], feature]
        y[i] = values[idx[i]]
    order = np.argsort(x)
    mean = 0.0
    for i in range(n):
        mean += y[i]
    mean /= n
    s_tot = 0.0
    ss_tot = 0.0
    for i in range(n):
        d = y[i] - mean
        s_tot += d
        ss_tot += d * d
    parent = ss_tot / n - (s_tot / n) ** 2
    s_l = 0.0
    ss_l = 0.0
    thresholds = np.empty(max(n - 1, 0))
    reductions = np.empty(max(n - 1, 0))
    m = 0
    for i in range(n - 1):
        d = y[order[i]] - mean
        s_l += d
        ss_l += d * d
        xi = x[order[i]]
        if xi < x[order[i + 1]]:
            nl = i + 1
            nr = n - nl
            if nl >= min_leaf and nr >= min_leaf:
                mse_l = max(ss_l / nl - (s_l / nl) ** 2, 0.0)
                s_r = s_tot - s_l
                mse_r = max((ss_tot - ss_l) / nr - (s_r / nr) ** 2, 0.0)
                thresholds[m] = xi
                if weighted:
                    reductions[m] = parent - (nl / n) * mse_l - (nr / n) * mse_r
                else:
                    reductions[m] = parent - mse_l - mse_r
                m += 1
    return thresholds[:m], reductions[:m]


@njit(cache=True)
def route(X, feature, threshold, left, right):
    """Leaf node index reached by every row of ``X`` (``x <= threshold`` goes left)."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
