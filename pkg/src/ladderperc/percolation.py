"""Sampling percolation configurations and computing their connectivity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .graph import BlockGeometry, EdgeClassMap, GraphError, LadderWindow, Vertex


@dataclass(frozen=True)
class ParamSet:
    """Bulk probability ``p``, per-class probabilities ``q`` and boost ``epsilon``."""

    p: float
    q: tuple[float, ...] = ()
    epsilon: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(x) for x in self.q))
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")
        for i, qi in enumerate(self.q, 1):
            if not 0.0 < qi < 1.0:
                raise ValueError(f"q_{i}={qi} outside (0, 1)")
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0 - self.p:
            raise ValueError(f"epsilon={self.epsilon} outside (0, 1 - p)")

    def edge_probabilities(self, classes: EdgeClassMap) -> np.ndarray:
        if len(self.q) != classes.n_classes:
            raise ValueError(f"{len(self.q)} class probabilities given, "
                             f"{classes.n_classes} classes defined")
        table = np.array((self.p,) + self.q)
        return table[classes.class_of]


@dataclass(eq=False)
class Configuration:
    """One open/closed bit per window edge."""

    window: LadderWindow
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.window.n_edges,):
            raise ValueError(f"expected {self.window.n_edges} bits, got {self.bits.shape}")

    def __eq__(self, other):
        return (isinstance(other, Configuration) and self.window is other.window
                and np.array_equal(self.bits, other.bits))

    def __le__(self, other):
        return bool(np.all(self.bits <= other.bits))

    @property
    def open_fraction(self) -> float:
        return float(self.bits.mean()) if self.bits.size else 0.0

    def to_hex(self) -> str:
        return np.packbits(self.bits, bitorder="little").tobytes().hex()

    def dump(self) -> dict:
        return {"window": self.window.fingerprint, "n_edges": self.window.n_edges,
                "bits": self.to_hex()}

    @classmethod
    def from_hex(cls, window: LadderWindow, text: str) -> "Configuration":
        raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little", count=window.n_edges)
        return cls(window, bits.astype(bool))

    @classmethod
    def load(cls, window: LadderWindow, record: dict) -> "Configuration":
        if record["window"] != window.fingerprint:
            raise ValueError("configuration dump was taken on a different window")
        return cls.from_hex(window, record["bits"])


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Generator for replica ``replica`` of root ``seed``.

    Stream ``i`` is ``SeedSequence(seed, spawn_key=(i,))``; it depends only on
    (seed, i), never on how replicas are spread over workers.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replica,)))


def shared_uniforms(window: LadderWindow, seed: int, replica: int = 0) -> np.ndarray:
    return replica_rng(seed, replica).random(window.n_edges)


def sample_configuration(window: LadderWindow, classes: EdgeClassMap, params: ParamSet,
                         seed: int, *, replica: int = 0, mode: str = "shared") -> Configuration:
    """Draw each edge open independently with its class probability.

    ``mode="shared"`` thresholds one uniform per edge, so for a fixed seed the
    result is edgewise nondecreasing in ``p`` and every ``q_i``.
    ``mode="bits"`` draws the bits directly with no such cross-parameter link.
    """
    if classes.window is not window:
        raise GraphError("edge classes belong to a different window")
    prob = params.edge_probabilities(classes)
    rng = replica_rng(seed, replica)
    if mode == "shared":
        bits = rng.random(window.n_edges) < prob
    elif mode == "bits":
        bits = rng.binomial(1, prob).astype(bool)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return Configuration(window, bits)


# ---------------------------------------------------------------------------
# Clusters and reach queries
# ---------------------------------------------------------------------------


def clusters(config: Configuration) -> list[frozenset[Vertex]]:
    """Connected components of the open subgraph (unoriented windows)."""
    w = config.window
    if w.oriented:
        raise GraphError("clusters() needs an unoriented window; use forward_cluster")
    labels = kernels.component_labels(w.n_vertices, w.tail, w.head, config.bits)
    groups: dict[int, list[int]] = {}
    for vid, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(vid)
    return sorted((frozenset(w.vertex_of(v) for v in g) for g in groups.values()),
                  key=lambda c: min(w.vertex_id(*x) for x in c))


def forward_cluster(config: Configuration, origin: Vertex) -> frozenset[Vertex]:
    w = config.window
    if not w.oriented:
        raise GraphError("forward_cluster() needs an oriented window; use clusters")
    src = np.zeros(w.n_vertices, dtype=bool)
    src[w.vertex_id(*origin)] = True
    reached = kernels.forward_sweep(w.n_vertices, w.tail, w.head, config.bits, src)
    return frozenset(w.vertex_of(v) for v in np.flatnonzero(reached))


@dataclass(frozen=True)
class ReachQuery:
    """Do the sources connect to the targets (a vertex set, a level, or both)?

    Oriented windows only follow edges upward, so a target level below every
    source is unreachable except through the sources themselves.
    """

    sources: frozenset[Vertex]
    target_vertices: frozenset[Vertex] = frozenset()
    target_level: int | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sources", frozenset(map(tuple, self.sources)))
        object.__setattr__(self, "target_vertices", frozenset(map(tuple, self.target_vertices)))
        if not self.sources:
            raise ValueError("a reach query needs at least one source")
        if not self.target_vertices and self.target_level is None:
            raise ValueError("a reach query needs a target set or a target level")

    def masks(self, window: LadderWindow) -> tuple[np.ndarray, np.ndarray]:
        src = np.zeros(window.n_vertices, dtype=bool)
        for x in self.sources:
            src[window.vertex_id(*x)] = True
        tgt = np.zeros(window.n_vertices, dtype=bool)
        for x in self.target_vertices:
            tgt[window.vertex_id(*x)] = True
        if self.target_level is not None:
            tgt |= window.vertex_level() >= self.target_level
        return src, tgt

    def describe(self) -> str:
        if self.label:
            return self.label
        parts = [f"{len(self.sources)} sources"]
        if self.target_level is not None:
            parts.append(f"level>={self.target_level}")
        if self.target_vertices:
            parts.append(f"{len(self.target_vertices)} target vertices")
        return " -> ".join(parts)

    @classmethod
    def crossing(cls, window: LadderWindow) -> "ReachQuery":
        """Whole floor to the top level."""
        src = [(v, window.n_min) for v in window.base.vertices]
        return cls(frozenset(src), target_level=window.n_max, label="floor->ceiling")

    @classmethod
    def survival(cls, window: LadderWindow, origin: Iterable[int], level: int | None = None,
                 lateral: bool = True) -> "ReachQuery":
        """``origin x {n_min}`` reaches ``level`` (default top) or the lateral edge.

        The lateral edge is every column over a base vertex of minimum degree
        (the two ends of an integer segment).
        """
        base = window.base
        src = frozenset((v, window.n_min) for v in origin)
        tgt: frozenset[Vertex] = frozenset()
        if lateral and base.n_vertices > 1:
            deg = np.array([len(base.neighbors[v]) for v in base.vertices])
            side = np.flatnonzero(deg == deg.min())
            tgt = frozenset((int(v), n) for v in side
                            for n in range(window.n_min, window.n_max + 1))
        lvl = window.n_max if level is None else level
        return cls(src, tgt, lvl, label=f"survival(level={lvl}, lateral={lateral})")


def reach_indicator(config: Configuration, query: ReachQuery) -> bool:
    w = config.window
    src, tgt = query.masks(w)
    return bool(kernels.reach(w.n_vertices, w.tail, w.head, config.bits, src, tgt, w.oriented))


def reach_threshold(window: LadderWindow, classes: EdgeClassMap, q: Sequence[float],
                    query: ReachQuery, uniforms: np.ndarray) -> np.ndarray:
    """Smallest bulk ``p`` at which each row of shared uniforms reaches.

    The reach event at bulk parameter ``p`` holds iff the threshold is ``< p``.
    """
    uniforms = np.atleast_2d(uniforms)
    src, tgt = query.masks(window)
    class_prob = np.array((0.0,) + tuple(q))
    if class_prob.shape[0] != classes.n_classes + 1:
        raise ValueError("class probability count mismatch")
    return kernels.bottleneck_batch(window.n_vertices, window.tail, window.head, uniforms,
                                    classes.class_of, class_prob, src, tgt, window.oriented)


# ---------------------------------------------------------------------------
# Boundary cluster functions on blocks
# ---------------------------------------------------------------------------


def _subset_to_mask(subset, universe: list[Vertex]) -> int:
    if isinstance(subset, (int, np.integer)):
        mask = int(subset)
        if mask < 0 or mask >> len(universe):
            raise ValueError("bitmask refers to vertices outside the boundary set")
        return mask
    pos = {x: i for i, x in enumerate(universe)}
    mask = 0
    for x in subset:
        x = tuple(x)
        if x not in pos:
            raise ValueError(f"{x} is not in the block's source boundary")
        mask |= 1 << pos[x]
    return mask


def mask_to_vertices(mask: int, universe: list[Vertex]) -> frozenset[Vertex]:
    return frozenset(x for i, x in enumerate(universe) if mask >> i & 1)


def boundary_matrix(block: BlockGeometry, block_bits: np.ndarray) -> np.ndarray:
    """``M[i, j]``: source-boundary vertex ``i`` reaches target-boundary vertex ``j``
    inside block 0 under ``block_bits`` (block-local edge order)."""
    block_bits = np.asarray(block_bits, dtype=bool)
    if block_bits.shape != (block.n_local_edges,):
        raise ValueError(f"block configuration needs {block.n_local_edges} bits")
    nv, t, h, verts = block.local_graph
    pos = {x: i for i, x in enumerate(verts)}
    rows = np.array([pos[x] for x in block.source_boundary(0)], dtype=np.int64)
    cols = np.array([pos[x] for x in block.target_boundary(0)], dtype=np.int64)
    return kernels.boundary_reach_matrix(nv, t, h, block_bits, rows, cols, block.oriented)


def cluster_from_matrix(matrix: np.ndarray, mask: int) -> int:
    rows = [i for i in range(matrix.shape[0]) if mask >> i & 1]
    hit = matrix[rows].any(axis=0)
    return sum(1 << j for j in np.flatnonzero(hit))


def boundary_cluster(block: BlockGeometry, block_bits: np.ndarray, subset) -> int:
    """Target-boundary vertices of block 0 reached from ``subset``.

    ``subset`` is a bitmask over ``block.source_boundary(0)`` or an iterable of
    its vertices; the result is a bitmask over ``block.target_boundary(0)``.
    For unoriented blocks both lists are ``block.boundary(0)``.
    """
    mask = _subset_to_mask(subset, block.source_boundary(0))
    if mask == 0:
        raise ValueError("the boundary subset must be nonempty")
    return cluster_from_matrix(boundary_matrix(block, block_bits), mask)


def containment_holds(m_small: np.ndarray, m_large: np.ndarray) -> bool:
    """``C(A, small) <= C(A, large)`` for every nonempty ``A``.

    Clusters are unions over the points of ``A``, so comparing singleton rows
    decides the statement for all ``2**|boundary|`` subsets at once.
    """
    return bool(np.all(m_small <= m_large))


LITERAL_SUBSET_LIMIT = 24


def subset_violation(m_small: np.ndarray, m_large: np.ndarray, *, equality: bool = False,
                     literal: bool | None = None) -> int | None:
    """A source subset ``A`` (bitmask) breaking ``C_small(A) <= C_large(A)``, or None.

    Both cluster functions are read off singleton matrices and are unions over
    the points of ``A``. With ``literal`` every nonempty ``A`` is visited
    (default when there are at most 24 sources); otherwise the singleton rows
    are compared, which decides the same statement. ``equality`` asks for
    ``C_small(A) == C_large(A)`` instead.
    """
    m_small = np.ascontiguousarray(m_small, dtype=bool)
    m_large = np.ascontiguousarray(m_large, dtype=bool)
    if m_small.shape != m_large.shape:
        raise ValueError("cluster matrices differ in shape")
    b, t = m_small.shape
    if literal is None:
        literal = b <= LITERAL_SUBSET_LIMIT
    if not literal:
        for i in range(b):
            bad = m_small[i] != m_large[i] if equality else m_small[i] & ~m_large[i]
            if bad.any():
                return 1 << i
        return None
    if b > 30:
        raise ValueError(f"literal enumeration over 2^{b} subsets refused")
    for lo in range(0, max(t, 1), 64):
        hit = kernels.subset_mismatch(m_small, m_large, lo, min(t, lo + 64), equality)
        if hit >= 0:
            return int(hit)
    return None
