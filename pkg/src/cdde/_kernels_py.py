"""Pure-numpy kernels.  Bit-compatible with the compiled versions."""

import numpy as np


def dp_backward(weights, offsets, template_of, template_start, indptr, indices):
    """Backward max-plus recursion over a layered graph.

    Transition ``l -> l+1`` uses CSR template ``template_of[l]``; row ``a`` of
    that template lists (ascending) the feasible successor indices of node
    ``a``.  Returns ``best`` (optimal suffix value per node, ``-inf`` when no
    feasible continuation exists) and ``nxt`` (smallest optimal successor).
    """
    weights = np.asarray(weights, dtype=float)
    L = len(offsets) - 1
    best = np.empty(offsets[L])
    nxt = np.full(offsets[L], -1, dtype=np.intp)
    best[offsets[L - 1]:] = weights[offsets[L - 1]:]
    for l in range(L - 2, -1, -1):
        lo, hi, nlo = offsets[l], offsets[l + 1], offsets[l + 1]
        n = hi - lo
        row = template_start[template_of[l]]
        ptr = np.asarray(indptr[row:row + n + 1])
        starts, counts = ptr[:-1], np.diff(ptr)
        nb = np.asarray(indices[ptr[0]:ptr[-1]])
        vals = best[nlo + nb] if len(nb) else np.empty(0)
        m = np.full(n, -np.inf)
        arg = np.full(n, -1, dtype=np.intp)
        has = counts > 0
        if len(nb):
            local = starts[has] - ptr[0]
            seg_max = np.maximum.reduceat(vals, local)
            m[has] = seg_max
            seg_id = np.repeat(np.arange(n), counts)
            hit = vals == m[seg_id]
            big = np.iinfo(np.intp).max
            cand = np.where(hit, nb, big)
            arg[has] = np.minimum.reduceat(cand, local)
            # -inf successors are not a feasible continuation
            arg[m == -np.inf] = -1
        best[lo:hi] = np.where(arg >= 0, weights[lo:hi] + m, -np.inf)
        nxt[lo:hi] = arg
    return best, nxt


def max_pair_quotient(values, points, group, min_dist):
    """Per leading index: max over same-group pairs of |dv| / |dp|."""
    values = np.asarray(values, dtype=float)
    points = np.asarray(points, dtype=float)
    T, n, _ = values.shape
    dist = np.sqrt(np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1))
    ok = (group[:, None] == group[None, :]) & (dist >= min_dist)
    ok &= np.triu(np.ones((n, n), dtype=bool), 1)
    ia_all, ib_all = np.nonzero(ok)
    best = np.zeros(T)
    ia = np.full(T, -1, dtype=np.intp)
    ib = np.full(T, -1, dtype=np.intp)
    if len(ia_all) == 0:
        return best, ia, ib
    d = dist[ia_all, ib_all]
    for k in range(T):
        dv = np.sqrt(np.sum((values[k, ia_all] - values[k, ib_all]) ** 2, axis=-1))
        q = dv / d
        i = int(np.argmax(q))
        if q[i] > 0.0:
            best[k], ia[k], ib[k] = q[i], ia_all[i], ib_all[i]
    return best, ia, ib
