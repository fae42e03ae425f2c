"""Compiled best-split tree growth used by :func:`nidsopt.classifiers.tree_fit`."""

import numpy as np
from numba import njit

GINI_CODE = 0
ENTROPY_CODE = 1
MIN_DECREASE = 1e-12


@njit(cache=True)
def node_impurity(n0, n1, criterion):
    total = n0 + n1
    if total == 0:
        return 0.0
    p0 = n0 / total
    p1 = n1 / total
    if criterion == GINI_CODE:
        return 1.0 - p0 * p0 - p1 * p1
    h = 0.0
    if p0 > 0:
        h -= p0 * np.log2(p0)
    if p1 > 0:
        h -= p1 * np.log2(p1)
    return h


@njit(cache=True)
def grow_tree(X, y, w, presorted, criterion, feature_subsample, min_samples_split, seed):
    """Grow one tree on the rows with positive weight ``w`` (bootstrap
    multiplicities). ``presorted[f]`` lists every row in ascending order of
    feature ``f``.

    Returns (feature, threshold, left, right, counts) trimmed to the node
    count. The rows of a node occupy the same segment of ``order[f]`` for
    every feature, kept sorted by that feature.
    """
    np.random.seed(seed)
    nf = X.shape[1]
    n_all = X.shape[0]
    n = 0
    for r in range(n_all):
        if w[r] > 0:
            n += 1
    order = np.empty((nf, n), np.int64)
    for f in range(nf):
        k = 0
        for i in range(n_all):
            r = presorted[f, i]
            if w[r] > 0:
                order[f, k] = r
                k += 1

    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    counts = np.zeros((cap, 2), np.int64)
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    goes_left = np.zeros(n_all, np.bool_)
    buf = np.empty(n, np.int64)

    for i in range(n):
        r = order[0, i]
        counts[0, y[r]] += w[r]
    n_nodes = 1
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    sp = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        n0 = counts[node, 0]
        n1 = counts[node, 1]
        total = n0 + n1
        if n0 == 0 or n1 == 0 or total < min_samples_split:
            continue
        parent = node_impurity(n0, n1, criterion)
        perm = np.random.permutation(nf)
        best_dec = MIN_DECREASE
        best_f = -1
        best_thr = 0.0
        for pos in range(nf):
            if pos >= feature_subsample and best_f >= 0:
                break
            f = perm[pos]
            c0 = 0
            c1 = 0
            for i in range(start, end - 1):
                r = order[f, i]
                if y[r] == 1:
                    c1 += w[r]
                else:
                    c0 += w[r]
                lo = X[r, f]
                hi = X[order[f, i + 1], f]
                if hi == lo:
                    continue
                nl = c0 + c1
                nr = total - nl
                child = (nl * node_impurity(c0, c1, criterion)
                         + nr * node_impurity(n0 - c0, n1 - c1, criterion)) / total
                dec = parent - child
                if dec > best_dec:
                    best_dec = dec
                    best_f = f
                    thr = lo + (hi - lo) / 2.0
                    if not (lo <= thr and thr < hi):
                        thr = lo
                    best_thr = thr
        if best_f < 0:
            continue

        l0 = 0
        l1 = 0
        n_left = 0
        for i in range(start, end):
            r = order[best_f, i]
            gl = X[r, best_f] <= best_thr
            goes_left[r] = gl
            if gl:
                n_left += 1
                if y[r] == 1:
                    l1 += w[r]
                else:
                    l0 += w[r]
        # stable partition keeps every feature's segment sorted
        for f in range(nf):
            a = 0
            b = n_left
            for i in range(start, end):
                r = order[f, i]
                if goes_left[r]:
                    buf[a] = r
                    a += 1
                else:
                    buf[b] = r
                    b += 1
            for i in range(end - start):
                order[f, start + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        li = n_nodes
        ri = n_nodes + 1
        n_nodes += 2
        left[node] = li
        right[node] = ri
        counts[li, 0] = l0
        counts[li, 1] = l1
        counts[ri, 0] = n0 - l0
        counts[ri, 1] = n1 - l1
        # right pushed first so the left subtree is grown first
        st_node[sp] = ri
        st_start[sp] = start + n_left
        st_end[sp] = end
        sp += 1
        st_node[sp] = li
        st_start[sp] = start
        st_end[sp] = start + n_left
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy())


@njit(cache=True)
def forest_votes(Q, features, thresholds, lefts, rights, leaf_labels, offsets):
    """Number of trees voting class 1 per query row. Trees are packed
    back to back; ``offsets[t]`` is the first node of tree ``t``."""
    n_q = Q.shape[0]
    n_trees = offsets.shape[0] - 1
    votes = np.zeros(n_q, np.int64)
    for t in range(n_trees):
        base = offsets[t]
        for r in range(n_q):
            node = 0
            while features[base + node] >= 0:
                if Q[r, features[base + node]] <= thresholds[base + node]:
                    node = lefts[base + node]
                else:
                    node = rights[base + node]
            votes[r] += leaf_labels[base + node]
    return votes
