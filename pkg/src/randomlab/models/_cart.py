"""Compiled CART regression trees and bagged forests.

Trees are stored as flat node arrays. A node with ``feature == -1`` is a
leaf; otherwise rows with ``x[feature] <= threshold`` go to ``left``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _grow_tree(X, y, rows, mtry, min_node, feature, threshold, left, right, value):
    n = rows.size
    p = X.shape[1]
    idx = rows.copy()
    feats = np.arange(p)

    stack_node = np.empty(2 * n + 1, np.int64)
    stack_start = np.empty(2 * n + 1, np.int64)
    stack_end = np.empty(2 * n + 1, np.int64)
    sp = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        s = stack_start[sp]
        e = stack_end[sp]
        m = e - s

        tot = 0.0
        sumsq = 0.0
        for t in range(s, e):
            v = y[idx[t]]
            tot += v
            sumsq += v * v
        value[node] = tot / m
        feature[node] = -1
        left[node] = -1
        right[node] = -1

        if m < 2 * min_node:
            continue
        base = tot * tot / m
        sse = sumsq - base
        if sse <= 1e-12 * (1.0 + sumsq):
            continue

        best_score = base
        best_f = -1
        best_thr = 0.0
        vals = np.empty(m)
        ys = np.empty(m)
        for j in range(mtry):
            r = j + np.random.randint(p - j)
            tmp = feats[j]
            feats[j] = feats[r]
            feats[r] = tmp
            f = feats[j]
            for t in range(m):
                vals[t] = X[idx[s + t], f]
            order = np.argsort(vals, kind="mergesort")
            for t in range(m):
                ys[t] = y[idx[s + order[t]]]
            left_sum = 0.0
            for t in range(m - 1):
                left_sum += ys[t]
                nl = t + 1
                nr = m - nl
                if nl < min_node:
                    continue
                if nr < min_node:
                    break
                lo = vals[order[t]]
                hi = vals[order[t + 1]]
                if lo == hi:
                    continue
                right_sum = tot - left_sum
                score = left_sum * left_sum / nl + right_sum * right_sum / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_thr = lo + (hi - lo) / 2.0

        if best_f < 0 or best_score - base <= 1e-12 * (1.0 + sumsq):
            continue

        # in-place partition of idx[s:e]
        i = s
        jj = e - 1
        while i <= jj:
            if X[idx[i], best_f] <= best_thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[jj]
                idx[jj] = tmp
                jj -= 1
        mid = i
        if mid == s or mid == e:
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        stack_node[sp] = rnode
        stack_start[sp] = mid
        stack_end[sp] = e
        sp += 1
        stack_node[sp] = lnode
        stack_start[sp] = s
        stack_end[sp] = mid
        sp += 1

    return n_nodes


@njit(cache=True)
def fit_forest(X, y, n_trees, mtry, min_node, bootstrap, seed):
    """Grow ``n_trees`` trees; returns the five stacked node arrays."""
    np.random.seed(seed)
    n = X.shape[0]
    max_nodes = 2 * n + 1
    feature = np.full((n_trees, max_nodes), -1, np.int64)
    threshold = np.zeros((n_trees, max_nodes))
    left = np.full((n_trees, max_nodes), -1, np.int64)
    right = np.full((n_trees, max_nodes), -1, np.int64)
    value = np.zeros((n_trees, max_nodes))
    for b in range(n_trees):
        if bootstrap:
            rows = np.empty(n, np.int64)
            for t in range(n):
                rows[t] = np.random.randint(n)
        else:
            rows = np.arange(n)
        _grow_tree(X, y, rows, mtry, min_node,
                   feature[b], threshold[b], left[b], right[b], value[b])
    return feature, threshold, left, right, value


@njit(cache=True)
def predict_forest(feature, threshold, left, right, value, X):
    n_trees = feature.shape[0]
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for b in range(n_trees):
            node = 0
            while feature[b, node] >= 0:
                if X[i, feature[b, node]] <= threshold[b, node]:
                    node = left[b, node]
                else:
                    node = right[b, node]
            acc += value[b, node]
        out[i] = acc / n_trees
    return out


@njit(cache=True)
def forest_cv_loss(X, y, fold_of, k, n_trees, mtry, min_node, bootstrap, seed):
    """Mean over folds of held-out MSE, one forest per training complement."""
    total = 0.0
    for j in range(k):
        n_test = 0
        for i in range(fold_of.size):
            if fold_of[i] == j:
                n_test += 1
        n_train = fold_of.size - n_test
        Xtr = np.empty((n_train, X.shape[1]))
        ytr = np.empty(n_train)
        Xte = np.empty((n_test, X.shape[1]))
        yte = np.empty(n_test)
        a = 0
        c = 0
        for i in range(fold_of.size):
            if fold_of[i] == j:
                Xte[c] = X[i]
                yte[c] = y[i]
                c += 1
            else:
                Xtr[a] = X[i]
                ytr[a] = y[i]
                a += 1
        f, t, l, r, v = fit_forest(Xtr, ytr, n_trees, mtry, min_node, bootstrap, seed + j)
        pred = predict_forest(f, t, l, r, v, Xte)
        err = 0.0
        for i in range(n_test):
            d = yte[i] - pred[i]
            err += d * d
        total += err / n_test
    return total / k
