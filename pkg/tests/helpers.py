"""Reference implementations used as independent oracles in the tests."""

from collections import deque

import numpy as np


def local_adjacency(block, bits):
    """Adjacency of the open block-local edges (directed upward when oriented)."""
    _, t, h, verts = block.local_graph
    adj = {x: [] for x in verts}
    for k in np.flatnonzero(bits):
        a, b = verts[t[k]], verts[h[k]]
        if block.oriented:
            lo, hi = (a, b) if a[1] < b[1] else (b, a)
            adj[lo].append(hi)
        else:
            adj[a].append(b)
            adj[b].append(a)
    return adj


def bfs_cluster(block, bits, sources):
    """Target-boundary vertices reached from ``sources`` by plain BFS."""
    adj = local_adjacency(block, bits)
    seen = set(sources)
    queue = deque(sources)
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return frozenset(x for x in block.target_boundary(0) if x in seen)


def window_reach(window, bits, sources, targets):
    """Plain BFS reach on a whole window configuration."""
    adj = {}
    for i in np.flatnonzero(bits):
        a, b = window.edge(i)
        adj.setdefault(a, []).append(b)
        if not window.oriented:
            adj.setdefault(b, []).append(a)
    seen = set(sources)
    queue = deque(sources)
    while queue:
        x = queue.popleft()
        if x in targets:
            return True
        for y in adj.get(x, []):
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return False


def brute_force_probability(window, probs, predicate):
    """Sum of product masses of the configurations satisfying ``predicate``."""
    m = window.n_edges
    total = 0.0
    for idx in range(1 << m):
        bits = np.array([(idx >> k) & 1 for k in range(m)], dtype=bool)
        mass = float(np.prod(np.where(bits, probs, 1.0 - probs)))
        if predicate(bits):
            total += mass
    return total
