"""Compiled connectivity kernels.

All kernels take a flat edge list (``tail``, ``head``) over dense vertex ids.
Oriented kernels rely on edges being sorted by the level of their tail, which
is the order produced by :func:`ladderperc.graph.build_ladder`.
"""

import math

import numpy as np
from numba import config, njit, prange

# The bundled TBB is often too old; prefer OpenMP and skip the warning.
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

INF = np.inf


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return ra


@njit(cache=True)
def component_labels(n_vertices, tail, head, open_mask):
    """Union-find labels (the root id) of the open subgraph."""
    parent = np.arange(n_vertices)
    size = np.ones(n_vertices, dtype=np.int64)
    for e in range(tail.shape[0]):
        if open_mask[e]:
            _union(parent, size, tail[e], head[e])
    labels = np.empty(n_vertices, dtype=np.int64)
    for v in range(n_vertices):
        labels[v] = _find(parent, v)
    return labels


@njit(cache=True)
def forward_sweep(n_vertices, tail, head, open_mask, source_mask):
    """Vertices reachable from ``source_mask`` along open oriented edges."""
    reached = source_mask.copy()
    for e in range(tail.shape[0]):
        if open_mask[e] and reached[tail[e]]:
            reached[head[e]] = True
    return reached


@njit(cache=True)
def reach(n_vertices, tail, head, open_mask, source_mask, target_mask, oriented):
    for v in range(n_vertices):
        if source_mask[v] and target_mask[v]:
            return True
    if oriented:
        reached = forward_sweep(n_vertices, tail, head, open_mask, source_mask)
        for v in range(n_vertices):
            if reached[v] and target_mask[v]:
                return True
        return False
    labels = component_labels(n_vertices, tail, head, open_mask)
    hit = np.zeros(n_vertices, dtype=np.bool_)
    for v in range(n_vertices):
        if source_mask[v]:
            hit[labels[v]] = True
    for v in range(n_vertices):
        if target_mask[v] and hit[labels[v]]:
            return True
    return False


@njit(cache=True)
def bottleneck(n_vertices, tail, head, weight, source_mask, target_mask, oriented):
    """Minimax path weight from sources to targets.

    An edge with weight ``w`` is open at parameter ``t`` iff ``w < t``, so the
    sources reach the targets at ``t`` iff the returned value is ``< t``.
    Returns ``-inf`` when a source is a target and ``inf`` when no path exists.
    """
    for v in range(n_vertices):
        if source_mask[v] and target_mask[v]:
            return -INF
    if oriented:
        cost = np.full(n_vertices, INF)
        for v in range(n_vertices):
            if source_mask[v]:
                cost[v] = -INF
        for e in range(tail.shape[0]):
            c = max(cost[tail[e]], weight[e])
            if c < cost[head[e]]:
                cost[head[e]] = c
        best = INF
        for v in range(n_vertices):
            if target_mask[v] and cost[v] < best:
                best = cost[v]
        return best
    # Kruskal with a super-source (n) and a super-target (n + 1).
    parent = np.arange(n_vertices + 2)
    size = np.ones(n_vertices + 2, dtype=np.int64)
    s = n_vertices
    t = n_vertices + 1
    for v in range(n_vertices):
        if source_mask[v]:
            _union(parent, size, s, v)
        if target_mask[v]:
            _union(parent, size, t, v)
    # Bucket the finite weights so only buckets up to the crossing get sorted.
    m = tail.shape[0]
    lo = INF
    hi = -INF
    n_fin = 0
    for e in range(m):
        w = weight[e]
        if w < INF:
            n_fin += 1
            if w < lo:
                lo = w
            if w > hi:
                hi = w
    if n_fin == 0:
        return INF
    nb = max(1, n_fin // 4)
    span = hi - lo
    bucket = np.empty(m, dtype=np.int64)
    counts = np.zeros(nb + 1, dtype=np.int64)
    for e in range(m):
        w = weight[e]
        if w < INF:
            b = 0 if span <= 0.0 else int((w - lo) / span * nb)
            if b >= nb:
                b = nb - 1
            bucket[e] = b
            counts[b + 1] += 1
        else:
            bucket[e] = -1
    for b in range(nb):
        counts[b + 1] += counts[b]
    fill = counts[:nb].copy()
    order = np.empty(n_fin, dtype=np.int64)
    for e in range(m):
        b = bucket[e]
        if b >= 0:
            order[fill[b]] = e
            fill[b] += 1
    for b in range(nb):
        start = counts[b]
        stop = counts[b + 1]
        if stop == start:
            continue
        idx = order[start:stop]
        local = np.argsort(weight[idx], kind="mergesort")
        for k in range(local.shape[0]):
            e = idx[local[k]]
            _union(parent, size, tail[e], head[e])
            if _find(parent, s) == _find(parent, t):
                return weight[e]
    return INF


@njit(cache=True, parallel=True)
def bottleneck_batch(n_vertices, tail, head, uniforms, class_of, class_prob,
                     source_mask, target_mask, oriented):
    """Per-replica critical bulk parameter under shared uniforms.

    Row ``r`` of ``uniforms`` holds one uniform per edge. Bulk edges (class 0)
    get weight ``u``; class edges are open (weight -1) iff ``u < q_class``,
    otherwise absent (weight inf).
    """
    n_rep = uniforms.shape[0]
    out = np.empty(n_rep)
    for r in prange(n_rep):
        w = np.empty(tail.shape[0])
        for e in range(tail.shape[0]):
            c = class_of[e]
            u = uniforms[r, e]
            if c == 0:
                w[e] = u
            elif u < class_prob[c]:
                w[e] = -1.0
            else:
                w[e] = INF
        out[r] = bottleneck(n_vertices, tail, head, w, source_mask, target_mask, oriented)
    return out


@njit(cache=True)
def boundary_reach_matrix(n_vertices, tail, head, open_mask, rows, cols, oriented):
    """Boolean matrix ``M[i, j]``: vertex ``rows[i]`` reaches ``cols[j]``."""
    m = np.zeros((rows.shape[0], cols.shape[0]), dtype=np.bool_)
    if oriented:
        # Reverse level sweep: reach[v, j] is the set of targets reachable from v.
        col_of = np.full(n_vertices, -1, dtype=np.int64)
        for j in range(cols.shape[0]):
            col_of[cols[j]] = j
        r = np.zeros((n_vertices, cols.shape[0]), dtype=np.bool_)
        for v in range(n_vertices):
            if col_of[v] >= 0:
                r[v, col_of[v]] = True
        for k in range(tail.shape[0] - 1, -1, -1):
            if open_mask[k]:
                a = tail[k]
                b = head[k]
                for j in range(cols.shape[0]):
                    if r[b, j]:
                        r[a, j] = True
        for i in range(rows.shape[0]):
            for j in range(cols.shape[0]):
                m[i, j] = r[rows[i], j]
        return m
    labels = component_labels(n_vertices, tail, head, open_mask)
    for i in range(rows.shape[0]):
        li = labels[rows[i]]
        for j in range(cols.shape[0]):
            m[i, j] = labels[cols[j]] == li
    return m


@njit(cache=True)
def _neumaier_add(total, comp, x):
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


@njit(cache=True, parallel=True)
def enumerate_reach_mass(n_vertices, tail, head, log_p1, log_p0, source_mask,
                         target_mask, oriented, n_chunks):
    """Exact probability of the reach event over all ``2**M`` configurations.

    Returns per-chunk compensated partial sums for the event and for the total
    mass; the caller reduces them in chunk order.
    """
    m = tail.shape[0]
    total = 1 << m
    chunk = (total + n_chunks - 1) // n_chunks
    hit_sums = np.zeros(n_chunks)
    mass_sums = np.zeros(n_chunks)
    for c in prange(n_chunks):
        lo = c * chunk
        hi = min(total, lo + chunk)
        hs = 0.0
        hc = 0.0
        ms = 0.0
        mc = 0.0
        open_mask = np.zeros(m, dtype=np.bool_)
        for idx in range(lo, hi):
            lw = 0.0
            for e in range(m):
                bit = (idx >> e) & 1
                open_mask[e] = bit == 1
                lw += log_p1[e] if bit == 1 else log_p0[e]
            w = math.exp(lw)
            ms, mc = _neumaier_add(ms, mc, w)
            if reach(n_vertices, tail, head, open_mask, source_mask, target_mask, oriented):
                hs, hc = _neumaier_add(hs, hc, w)
        hit_sums[c] = hs + hc
        mass_sums[c] = ms + mc
    return hit_sums, mass_sums


@njit(cache=True)
def _row_bits(matrix, col_lo, col_hi):
    out = np.zeros(matrix.shape[0], dtype=np.uint64)
    for i in range(matrix.shape[0]):
        acc = np.uint64(0)
        for j in range(col_lo, col_hi):
            if matrix[i, j]:
                acc |= np.uint64(1) << np.uint64(j - col_lo)
        out[i] = acc
    return out


@njit(cache=True)
def _subset_table(bits, offset, width):
    table = np.zeros(1 << width, dtype=np.uint64)
    for m in range(1, 1 << width):
        low = m & -m
        k = 0
        while (low >> k) != 1:
            k += 1
        table[m] = table[m & (m - 1)] | bits[offset + k]
    return table


@njit(cache=True)
def subset_mismatch(small, large, col_lo, col_hi, equality):
    """First nonempty row subset ``A`` whose union of ``small`` rows is not
    contained in (or, with ``equality``, not equal to) the union of ``large``
    rows, restricted to columns ``[col_lo, col_hi)`` (at most 64). -1 if none.

    Every subset is visited; the union over a subset is assembled from two
    half-size lookup tables.
    """
    b = small.shape[0]
    s_bits = _row_bits(small, col_lo, col_hi)
    l_bits = _row_bits(large, col_lo, col_hi)
    lo = b // 2
    hi = b - lo
    s_lo = _subset_table(s_bits, 0, lo)
    l_lo = _subset_table(l_bits, 0, lo)
    s_hi = _subset_table(s_bits, lo, hi)
    l_hi = _subset_table(l_bits, lo, hi)
    for mh in range(1 << hi):
        sh = s_hi[mh]
        lh = l_hi[mh]
        for ml in range(1 << lo):
            if mh == 0 and ml == 0:
                continue
            s = sh | s_lo[ml]
            g = lh | l_lo[ml]
            if equality:
                if s != g:
                    return (mh << lo) | ml
            elif s & ~g:
                return (mh << lo) | ml
    return -1


@njit(cache=True)
def exhaustive_witness(n_vertices, tail, head, rows, cols, oriented, reference, direction):
    """Scan all ``2**M`` block configurations for a singleton witness.

    ``direction == 0``: some source reaches a target the reference row lacks.
    ``direction == 1``: the reference row has a target the configuration misses.
    Returns (configuration index, source row) or (-1, -1).
    """
    m = tail.shape[0]
    open_mask = np.zeros(m, dtype=np.bool_)
    for idx in range(1 << m):
        for e in range(m):
            open_mask[e] = (idx >> e) & 1 == 1
        mat = boundary_reach_matrix(n_vertices, tail, head, open_mask, rows, cols, oriented)
        for i in range(rows.shape[0]):
            for j in range(cols.shape[0]):
                if direction == 0 and mat[i, j] and not reference[i, j]:
                    return idx, i
                if direction == 1 and reference[i, j] and not mat[i, j]:
                    return idx, i
    return -1, -1
