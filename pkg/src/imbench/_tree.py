"""Compiled tree-growing kernels.

Trees are stored as five flat arrays indexed by node id: ``feature``
(-1 marks a leaf), ``threshold``, ``left``, ``right`` and ``value``.
A sample goes left when ``x[feature] <= threshold``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _gini_part(wp, wn):
    # total weight times Gini impurity of the node
    w = wp + wn
    if w <= 0.0:
        return 0.0
    return w - (wp * wp + wn * wn) / w


@njit(cache=True)
def _midpoint(a, b):
    t = a + (b - a) / 2.0
    if t >= b:
        t = a
    return t


@njit(cache=True)
def _partition(idx, start, end, X, f, thr, buf):
    # stable partition of idx[start:end] on X[:, f] <= thr; returns split point
    nl = 0
    nr = 0
    for i in range(start, end):
        j = idx[i]
        if X[j, f] <= thr:
            idx[start + nl] = j
            nl += 1
        else:
            buf[nr] = j
            nr += 1
    for i in range(nr):
        idx[start + nl + i] = buf[i]
    return start + nl


@njit(cache=True)
def build_gini_tree(X, y, w, mtry, max_depth, min_leaf, seed):
    """Grow a weighted-Gini classification tree.

    ``mtry < d`` samples that many candidate features per node (random
    forest mode); ``max_depth < 0`` means unlimited.
    """
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)

    if mtry < d:
        np.random.seed(seed)
    feats = np.arange(d)
    idx = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    vals = np.empty(n, dtype=np.float64)

    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]

        wp = 0.0
        wn = 0.0
        cp = 0
        for i in range(start, end):
            j = idx[i]
            if y[j] == 1:
                wp += w[j]
                cp += 1
            else:
                wn += w[j]
        m = end - start
        if wp + wn > 0.0:
            value[node] = wp / (wp + wn)
        else:
            value[node] = cp / m

        if cp == 0 or cp == m:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if m < 2 * min_leaf:
            continue

        if mtry < d:
            # partial Fisher-Yates, then ascending order for tie-breaking
            for i in range(mtry):
                r = i + np.random.randint(0, d - i)
                tmp = feats[i]
                feats[i] = feats[r]
                feats[r] = tmp
            cand = np.sort(feats[:mtry])
        else:
            cand = feats

        # criteria within tol of the best count as ties, so the earliest
        # candidate wins regardless of rounding (keeps scale invariance)
        tol = 1e-10 * (wp + wn)
        best = np.inf
        best_f = -1
        best_t = 0.0
        for c in range(cand.shape[0]):
            f = cand[c]
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            lp = 0.0
            ln = 0.0
            for i in range(m - 1):
                j = idx[start + order[i]]
                if y[j] == 1:
                    lp += w[j]
                else:
                    ln += w[j]
                a = vals[order[i]]
                b = vals[order[i + 1]]
                if a == b:
                    continue
                if i + 1 < min_leaf or m - i - 1 < min_leaf:
                    continue
                crit = _gini_part(lp, ln) + _gini_part(wp - lp, wn - ln)
                if crit < best - tol:
                    best = crit
                    best_f = f
                    best_t = _midpoint(a, b)

        if best_f < 0:
            continue

        mid = _partition(idx, start, end, X, best_f, best_t, buf)
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is expanded first
        stack[top, 0] = rnode
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lnode
        stack[top, 1] = start
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            value[:n_nodes].copy())


@njit(cache=True)
def presort(X):
    n, d = X.shape
    order = np.empty((d, n), dtype=np.int64)
    for f in range(d):
        order[f] = np.argsort(X[:, f], kind="mergesort")
    return order


@njit(cache=True)
def build_newton_tree(X, order, g, h, max_depth, lam, min_child_weight):
    """Grow a second-order regression tree on gradients ``g`` and hessians ``h``.

    Grown level by level: each level makes one pass over every feature's
    presorted ``order``. Leaf value is ``-G / (H + lam)``; split gain is the
    usual Newton boosting gain. Ties keep the lowest feature, then the
    lowest threshold.
    """
    n, d = X.shape
    cap = 2 ** (max_depth + 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)
    node_G = np.zeros(cap)
    node_H = np.zeros(cap)
    node_n = np.zeros(cap, dtype=np.int64)

    node_of = np.zeros(n, dtype=np.int64)
    for i in range(n):
        node_G[0] += g[i]
        node_H[0] += h[i]
    node_n[0] = n
    value[0] = -node_G[0] / (node_H[0] + lam)

    lo = 0
    hi = 1
    n_nodes = 1
    cumG = np.zeros(cap)
    cumH = np.zeros(cap)
    cnt = np.zeros(cap, dtype=np.int64)
    last = np.zeros(cap)
    best = np.zeros(cap)
    best_f = np.full(cap, -1, dtype=np.int64)
    best_t = np.zeros(cap)
    active = np.zeros(cap, dtype=np.bool_)

    for depth in range(max_depth):
        any_active = False
        for nd in range(lo, hi):
            active[nd] = node_n[nd] >= 2 and node_H[nd] >= 2.0 * min_child_weight
            best[nd] = 1e-12
            best_f[nd] = -1
            if active[nd]:
                any_active = True
        if not any_active:
            break
        for f in range(d):
            for nd in range(lo, hi):
                cumG[nd] = 0.0
                cumH[nd] = 0.0
                cnt[nd] = 0
            for i in range(n):
                j = order[f, i]
                nd = node_of[j]
                if nd < lo or not active[nd]:
                    continue
                v = X[j, f]
                if cnt[nd] > 0 and v != last[nd]:
                    gl = cumG[nd]
                    hl = cumH[nd]
                    hr = node_H[nd] - hl
                    if hl >= min_child_weight and hr >= min_child_weight:
                        G = node_G[nd]
                        gr = G - gl
                        gain = (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                                - G * G / (node_H[nd] + lam))
                        if gain > best[nd]:
                            best[nd] = gain
                            best_f[nd] = f
                            best_t[nd] = _midpoint(last[nd], v)
                cumG[nd] += g[j]
                cumH[nd] += h[j]
                cnt[nd] += 1
                last[nd] = v

        new_lo = n_nodes
        for nd in range(lo, hi):
            if best_f[nd] < 0:
                continue
            feature[nd] = best_f[nd]
            threshold[nd] = best_t[nd]
            left[nd] = n_nodes
            right[nd] = n_nodes + 1
            n_nodes += 2
        if n_nodes == new_lo:
            break
        for i in range(n):
            nd = node_of[i]
            if nd < lo or feature[nd] < 0:
                continue
            if X[i, feature[nd]] <= threshold[nd]:
                c = left[nd]
            else:
                c = right[nd]
            node_of[i] = c
            node_G[c] += g[i]
            node_H[c] += h[i]
            node_n[c] += 1
        for c in range(new_lo, n_nodes):
            value[c] = -node_G[c] / (node_H[c] + lam)
        lo = new_lo
        hi = n_nodes

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(),
            value[:n_nodes].copy())


@njit(cache=True)
def predict_tree(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True)
def nearest_labels(Xtrain, ytrain, X):
    # first index wins on equal distance
    n = X.shape[0]
    m, d = Xtrain.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        lab = 0
        for j in range(m):
            s = 0.0
            for k in range(d):
                t = X[i, k] - Xtrain[j, k]
                s += t * t
            if s < best:
                best = s
                lab = ytrain[j]
        out[i] = lab
    return out
