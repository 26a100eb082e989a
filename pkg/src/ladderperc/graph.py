"""Base graphs, ladder windows, edge classes and block geometry.

A ladder window is the finite piece ``V x [n_min, n_max]`` of the product of a
base graph with the integers. Vertices ``(v, n)`` get the dense id
``(n - n_min) * |V| + v``. Edges are indexed in a fixed order

* unoriented: per level ``n``, horizontal copies of the base edges (by base
  edge id), then vertical edges ``{(u, n), (u, n + 1)}`` (by vertex id);
* oriented: per transition ``n -> n + 1``, edges ``<(u, n), (v, n + 1)>`` with
  ``u < v`` (by base edge id), then the reversed ones ``<(v, n), (u, n + 1)>``.

so a seed reproduces the same configuration bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import yaml

Vertex = tuple[int, int]  # (base vertex id, level)
EdgeKey = tuple[Vertex, Vertex]

HORIZONTAL, VERTICAL = 0, 1
FORWARD, BACKWARD = 0, 1


class GraphError(ValueError):
    """Invalid base graph, window or class specification."""


class GeometryError(RuntimeError):
    """A block construction failed one of its own consistency checks."""


# ---------------------------------------------------------------------------
# Base graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BaseGraph:
    """Finite connected simple graph with vertices ``0..n-1``."""

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n_vertices < 1:
            raise GraphError("base graph needs at least one vertex")
        seen = set()
        canon = []
        for u, v in self.edges:
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise GraphError(f"edge ({u}, {v}) has a dangling endpoint")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
            canon.append(key)
        object.__setattr__(self, "edges", tuple(canon))
        if self.labels is not None and len(self.labels) != self.n_vertices:
            raise GraphError("labels must name every vertex")
        if len(self._bfs(0)) != self.n_vertices:
            raise GraphError("base graph is disconnected")

    @property
    def vertices(self) -> range:
        return range(self.n_vertices)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def edge_id(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    def _bfs(self, start: int) -> dict[int, int]:
        dist = {start: 0}
        queue = deque([start])
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def distances_from(self, sources: Iterable[int]) -> np.ndarray:
        """Graph distance to the nearest source (``-1`` if unreachable)."""
        dist = np.full(self.n_vertices, -1, dtype=np.int64)
        queue = deque()
        for s in sources:
            if dist[s] < 0:
                dist[s] = 0
                queue.append(s)
        while queue:
            x = queue.popleft()
            for y in self.neighbors[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def ball(self, center: int, radius: int) -> tuple[int, ...]:
        """Vertices within ``radius`` of ``center``, ordered by (distance, id)."""
        dist = self.distances_from([center])
        members = [v for v in self.vertices if 0 <= dist[v] <= radius]
        return tuple(sorted(members, key=lambda v: (dist[v], v)))

    def shortest_path(self, start: int, targets: Iterable[int]) -> list[int]:
        """Lexicographically smallest shortest vertex path to the target set."""
        targets = set(targets)
        if start in targets:
            return [start]
        dist = self.distances_from(targets)
        if dist[start] < 0:
            raise GraphError(f"no path from {start} to {sorted(targets)}")
        path = [start]
        while dist[path[-1]] > 0:
            x = path[-1]
            # Greedy smallest-id descent gives the lexicographic minimum.
            path.append(min(y for y in self.neighbors[x] if dist[y] == dist[x] - 1))
        return path

    def induced_edges(self, subset: Iterable[int]) -> tuple[tuple[int, int], ...]:
        s = set(subset)
        return tuple(e for e in self.edges if e[0] in s and e[1] in s)

    def label(self, v: int) -> str:
        return self.labels[v] if self.labels is not None else str(v)

    def vertex(self, label) -> int:
        """Vertex id for a label (ints are matched against string labels)."""
        if self.labels is None:
            return int(label)
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise GraphError(f"unknown vertex label {label!r}") from None

    def describe(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "edges": [list(e) for e in self.edges],
            "labels": list(self.labels) if self.labels is not None else None,
        }


def integer_segment(lo: int, hi: int) -> BaseGraph:
    """The path ``lo, lo+1, ..., hi`` standing in for a window of the integers.

    Vertex ids run ``0..hi-lo``; labels are the integers themselves, so
    ``g.vertex(-1)`` finds the id of ``-1``.
    """
    if hi < lo:
        raise GraphError("empty integer segment")
    n = hi - lo + 1
    return BaseGraph(n, tuple((i, i + 1) for i in range(n - 1)),
                     tuple(str(lo + i) for i in range(n)))


def path_graph(n: int) -> BaseGraph:
    return integer_segment(0, n - 1)


def cycle_graph(n: int) -> BaseGraph:
    if n < 3:
        raise GraphError("a simple cycle needs at least 3 vertices")
    return BaseGraph(n, tuple((i, (i + 1) % n) for i in range(n)))


def grid_graph(width: int, height: int) -> BaseGraph:
    edges = []
    for y in range(height):
        for x in range(width):
            v = y * width + x
            if x + 1 < width:
                edges.append((v, v + 1))
            if y + 1 < height:
                edges.append((v, v + width))
    return BaseGraph(width * height, tuple(edges))


def _labels_to_graph(labels: list[str], pairs: list[tuple[str, str]]) -> BaseGraph:
    try:
        order = sorted(labels, key=int)
    except ValueError:
        order = labels
    ids = {lab: i for i, lab in enumerate(order)}
    edges = []
    for a, b in pairs:
        if a not in ids or b not in ids:
            raise GraphError(f"edge ({a}, {b}) has a dangling endpoint")
        edges.append((ids[a], ids[b]))
    return BaseGraph(len(order), tuple(edges), tuple(order))


def parse_edge_list(text: str) -> BaseGraph:
    """Parse the line format: ``u v`` per edge, ``# vertex x`` declarations.

    Other ``#`` lines and blank lines are ignored. Labels are arbitrary tokens;
    if every label is an integer, ids follow numeric order, otherwise order of
    first appearance.
    """
    labels: list[str] = []
    seen: set[str] = set()
    pairs = []

    def note(lab):
        if lab not in seen:
            seen.add(lab)
            labels.append(lab)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "vertex":
                note(parts[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'u v', got {raw!r}")
        note(parts[0])
        note(parts[1])
        pairs.append((parts[0], parts[1]))
    if not labels:
        raise GraphError("no vertices")
    return _labels_to_graph(labels, pairs)


def graph_from_mapping(data: dict) -> BaseGraph:
    """Structured variant: ``{vertices: [...], edges: [[u, v], ...]}``.

    ``{segment: [lo, hi]}`` is accepted as shorthand for :func:`integer_segment`.
    """
    if "segment" in data:
        lo, hi = data["segment"]
        return integer_segment(int(lo), int(hi))
    pairs = [(str(a), str(b)) for a, b in data.get("edges", [])]
    labels = [str(v) for v in data.get("vertices", [])]
    seen = set(labels)
    for a, b in pairs:
        for lab in (a, b):
            if lab not in seen:
                seen.add(lab)
                labels.append(lab)
    if not labels:
        raise GraphError("no vertices")
    if "vertices" in data:
        declared = {str(v) for v in data["vertices"]}
        for a, b in pairs:
            if a not in declared or b not in declared:
                raise GraphError(f"edge ({a}, {b}) has a dangling endpoint")
    return _labels_to_graph(labels, pairs)


def load_base_graph(source: str) -> BaseGraph:
    """Load a base graph from text in either supported format."""
    stripped = source.lstrip()
    if stripped.startswith("{") or any(
        line.split(":")[0].strip() in ("edges", "vertices", "segment", "graph")
        for line in source.splitlines() if ":" in line
    ):
        data = yaml.safe_load(source)
        if not isinstance(data, dict):
            raise GraphError("structured graph source must be a mapping")
        return graph_from_mapping(data.get("graph", data))
    return parse_edge_list(source)


# ---------------------------------------------------------------------------
# Ladder window
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LadderWindow:
    base: BaseGraph
    oriented: bool
    n_min: int
    n_max: int
    tail: np.ndarray = field(repr=False)
    head: np.ndarray = field(repr=False)
    level: np.ndarray = field(repr=False)  # level of the tail vertex
    kind: np.ndarray = field(repr=False)
    base_id: np.ndarray = field(repr=False)  # base edge id, or vertex id for verticals

    @property
    def n_levels(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def n_vertices(self) -> int:
        return self.base.n_vertices * self.n_levels

    @property
    def n_edges(self) -> int:
        return int(self.tail.shape[0])

    def vertex_id(self, v: int, n: int) -> int:
        if not (0 <= v < self.base.n_vertices and self.n_min <= n <= self.n_max):
            raise GraphError(f"vertex {(v, n)} is outside the window")
        return (n - self.n_min) * self.base.n_vertices + v

    def vertex_of(self, vid: int) -> Vertex:
        n, v = divmod(int(vid), self.base.n_vertices)
        return (v, n + self.n_min)

    def vertex_level(self) -> np.ndarray:
        return np.arange(self.n_vertices) // self.base.n_vertices + self.n_min

    def vertex_base(self) -> np.ndarray:
        return np.arange(self.n_vertices) % self.base.n_vertices

    def edge(self, i: int) -> EdgeKey:
        return (self.vertex_of(self.tail[i]), self.vertex_of(self.head[i]))

    def edges(self) -> list[EdgeKey]:
        return [self.edge(i) for i in range(self.n_edges)]

    @cached_property
    def edge_index(self) -> dict[EdgeKey, int]:
        return {self.edge(i): i for i in range(self.n_edges)}

    def index_of(self, a: Vertex, b: Vertex) -> int:
        """Index of the edge between ``a`` and ``b`` (tail first if oriented)."""
        key = (a, b)
        if not self.oriented and (self.vertex_id(*a) > self.vertex_id(*b)):
            key = (b, a)
        try:
            return self.edge_index[key]
        except KeyError:
            raise GraphError(f"no edge {key} in window") from None

    @cached_property
    def fingerprint(self) -> str:
        blob = json.dumps({"base": self.base.describe(), "oriented": self.oriented,
                           "levels": [self.n_min, self.n_max]}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_ladder(base: BaseGraph, oriented: bool, n_min: int, n_max: int) -> LadderWindow:
    if n_min >= n_max:
        raise GraphError(f"empty level range [{n_min}, {n_max}]")
    nv = base.n_vertices
    edges = np.array(base.edges, dtype=np.int64).reshape(-1, 2)
    n_e = edges.shape[0]
    verts = np.arange(nv)
    tails, heads, levels, kinds, ids = [], [], [], [], []

    def vid(v, n):
        return (n - n_min) * nv + v

    for n in range(n_min, n_max + 1):
        if oriented:
            if n == n_max:
                break
            for k, (a, b) in ((FORWARD, (edges[:, 0], edges[:, 1])),
                              (BACKWARD, (edges[:, 1], edges[:, 0]))):
                tails.append(vid(a, n))
                heads.append(vid(b, n + 1))
                levels.append(np.full(n_e, n))
                kinds.append(np.full(n_e, k))
                ids.append(np.arange(n_e))
        else:
            tails.append(vid(edges[:, 0], n))
            heads.append(vid(edges[:, 1], n))
            levels.append(np.full(n_e, n))
            kinds.append(np.full(n_e, HORIZONTAL))
            ids.append(np.arange(n_e))
            if n < n_max:
                tails.append(vid(verts, n))
                heads.append(vid(verts, n + 1))
                levels.append(np.full(nv, n))
                kinds.append(np.full(nv, VERTICAL))
                ids.append(verts.copy())
    cat = lambda xs: np.concatenate(xs).astype(np.int64) if xs else np.zeros(0, np.int64)
    return LadderWindow(base, bool(oriented), n_min, n_max, cat(tails), cat(heads),
                        cat(levels), cat(kinds), cat(ids))


# ---------------------------------------------------------------------------
# Edge classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EdgeClassMap:
    """Class labels: 0 for bulk edges, ``1..K`` for the copies of ``e_i``,
    ``K+1..K+L`` for the vertical lines above ``w_j``."""

    window: LadderWindow
    distinguished_edges: tuple[tuple[int, int], ...]
    distinguished_vertices: tuple[int, ...]
    class_of: np.ndarray = field(repr=False)

    @property
    def n_classes(self) -> int:
        return len(self.distinguished_edges) + len(self.distinguished_vertices)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.class_of == c)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.class_of, minlength=self.n_classes + 1)


def classify_edges(window: LadderWindow, edges: Sequence[tuple[int, int]] = (),
                   vertices: Sequence[int] = ()) -> EdgeClassMap:
    base = window.base
    if window.oriented and len(vertices):
        raise GraphError("vertical edge classes do not exist on an oriented ladder")
    canon = []
    for u, v in edges:
        key = (min(u, v), max(u, v))
        if key not in base.edge_id:
            raise GraphError(f"distinguished edge {(u, v)} is not a base edge")
        if key in canon:
            raise GraphError(f"distinguished edge {key} listed twice")
        canon.append(key)
    verts = []
    for w in vertices:
        if not 0 <= w < base.n_vertices:
            raise GraphError(f"distinguished vertex {w} is not a base vertex")
        if w in verts:
            raise GraphError(f"distinguished vertex {w} listed twice")
        verts.append(int(w))
    K = len(canon)
    class_of = np.zeros(window.n_edges, dtype=np.int64)
    is_horizontal = (window.kind == HORIZONTAL) | window.oriented
    for i, key in enumerate(canon):
        hit = is_horizontal & (window.base_id == base.edge_id[key])
        if not window.oriented:
            hit &= window.kind == HORIZONTAL
        class_of[hit] = i + 1
    if not window.oriented:
        for j, w in enumerate(verts):
            class_of[(window.kind == VERTICAL) & (window.base_id == w)] = K + j + 1
    return EdgeClassMap(window, tuple(canon), tuple(verts), class_of)


# ---------------------------------------------------------------------------
# Block geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockGeometry:
    """Block decomposition of a window around a region ``U`` of the base graph.

    ``region`` is ``U`` (for balls, ordered by distance then id), ``walls`` is
    the outer vertex boundary of ``U`` (the sphere of radius ``r + 1`` when
    ``U = B_r(u_0)``), ``rim`` the vertices of ``U`` with a neighbour outside.
    Edge sets are stored as window edge indices; ``local_class`` labels the
    block-local edge order (shared by every block) with 0 for boundary edges.
    """

    window: LadderWindow
    classes: EdgeClassMap
    center: int | None
    radius: int | None
    region: tuple[int, ...]
    walls: tuple[int, ...]
    rim: tuple[int, ...]
    height: int
    block_numbers: tuple[int, ...]
    block_edges: dict[int, np.ndarray] = field(repr=False)
    exterior_edges: np.ndarray = field(repr=False)
    local_class: np.ndarray = field(repr=False)

    @property
    def oriented(self) -> bool:
        return self.window.oriented

    @property
    def n_local_edges(self) -> int:
        return int(self.local_class.shape[0])

    @property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.local_class == 0

    def floor_level(self, n: int = 0) -> int:
        return self.height * n

    def block_vertices(self, n: int = 0) -> list[Vertex]:
        cols = sorted(self.region + self.walls)
        return [(v, m) for m in range(self.height * n, self.height * (n + 1) + 1)
                for v in cols]

    def _walls_at(self, n: int) -> list[Vertex]:
        return [(v, m) for m in range(self.height * n, self.height * (n + 1) + 1)
                for v in self.walls]

    def boundary(self, n: int = 0) -> list[Vertex]:
        """Walls, floor and ceiling (unoriented block)."""
        lo, hi = self.height * n, self.height * (n + 1)
        reg = sorted(self.region)
        return (self._walls_at(n) + [(v, lo) for v in reg] + [(v, hi) for v in reg])

    def lower_boundary(self, n: int = 0) -> list[Vertex]:
        """Walls and floor (oriented block)."""
        lo = self.height * n
        return self._walls_at(n) + [(v, lo) for v in sorted(self.region)]

    def upper_boundary(self, n: int = 0) -> list[Vertex]:
        """Walls and ceiling (oriented block)."""
        hi = self.height * (n + 1)
        return self._walls_at(n) + [(v, hi) for v in sorted(self.region)]

    def source_boundary(self, n: int = 0) -> list[Vertex]:
        return self.lower_boundary(n) if self.oriented else self.boundary(n)

    def target_boundary(self, n: int = 0) -> list[Vertex]:
        return self.upper_boundary(n) if self.oriented else self.boundary(n)

    def translate(self, local: np.ndarray, n: int) -> np.ndarray:
        """Window edge indices of block ``n`` for block-local positions."""
        return self.block_edges[n][local]

    def class_members(self, c: int) -> np.ndarray:
        """Block-local positions of class ``c`` (0 = boundary edges)."""
        return np.flatnonzero(self.local_class == c)

    @cached_property
    def local_graph(self):
        """Block 0 as a standalone graph: (n_vertices, tail, head, vertex list)."""
        verts = self.block_vertices(0)
        pos = {x: i for i, x in enumerate(verts)}
        idx = self.block_edges[self.block_numbers[0]]
        shift = self.height * self.block_numbers[0]
        t = np.empty(idx.shape[0], dtype=np.int64)
        h = np.empty(idx.shape[0], dtype=np.int64)
        for k, e in enumerate(idx):
            (a, la), (b, lb) = self.window.edge(e)
            t[k] = pos[(a, la - shift)]
            h[k] = pos[(b, lb - shift)]
        return len(verts), t, h, verts


def _region_from(base: BaseGraph, center, radius, region) -> tuple[int, ...]:
    if region is not None:
        reg = tuple(sorted(set(int(v) for v in region)))
        if not reg:
            raise GraphError("empty region")
        for v in reg:
            if not 0 <= v < base.n_vertices:
                raise GraphError(f"region vertex {v} is not a base vertex")
        if not _connected_within(base, set(reg)):
            raise GraphError("region must induce a connected subgraph")
        return reg
    if center is None or radius is None:
        raise GraphError("give either center and radius, or an explicit region")
    if radius < 0:
        raise GraphError("radius must be nonnegative")
    return base.ball(center, radius)


def _connected_within(base: BaseGraph, sub: set[int]) -> bool:
    start = next(iter(sub))
    seen = {start}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for y in base.neighbors[x]:
            if y in sub and y not in seen:
                seen.add(y)
                queue.append(y)
    return seen == sub


def build_block_geometry(window: LadderWindow, classes: EdgeClassMap, *,
                         center: int | None = None, radius: int | None = None,
                         region: Iterable[int] | None = None) -> BlockGeometry:
    """Decompose ``window`` into blocks of height ``2L+2`` (``2K+2`` oriented).

    The distinguished edges of ``classes`` must be exactly the base edges inside
    the region, and (unoriented) the distinguished vertices exactly its vertices.
    Blocks are the ``n`` with ``[h*n, h*(n+1)]`` inside the window levels.
    """
    if classes.window is not window:
        raise GraphError("edge classes belong to a different window")
    base = window.base
    reg = _region_from(base, center, radius, region)
    reg_set = set(reg)
    inside = set(base.induced_edges(reg))
    if set(classes.distinguished_edges) != inside:
        raise GraphError("distinguished edges must be exactly the edges inside the region")
    if not window.oriented and set(classes.distinguished_vertices) != reg_set:
        raise GraphError("distinguished vertices must be exactly the region's vertices")
    walls = tuple(sorted({y for x in reg for y in base.neighbors[x] if y not in reg_set}))
    if not walls:
        raise GraphError("the region's outer boundary is empty: B_{r+1} exceeds the base graph")
    if center is not None and radius is not None and region is None:
        dist = base.distances_from([center])
        if any(dist[w] != radius + 1 for w in walls):
            raise GraphError("outer boundary is not the sphere of radius r+1")
    rim = tuple(v for v in sorted(reg) if any(y not in reg_set for y in base.neighbors[v]))
    K = len(classes.distinguished_edges)
    L = len(classes.distinguished_vertices)
    h = 2 * K + 2 if window.oriented else 2 * L + 2
    first = -((-window.n_min) // h)
    last = window.n_max // h - 1
    if last < first:
        raise GraphError(f"window levels [{window.n_min}, {window.n_max}] hold no block of height {h}")
    cols = reg_set | set(walls)
    vb = window.base
    t_base = window.tail % vb.n_vertices
    h_base = window.head % vb.n_vertices
    t_lev = window.tail // vb.n_vertices + window.n_min
    h_lev = window.head // vb.n_vertices + window.n_min
    in_cols = np.isin(t_base, list(cols)) & np.isin(h_base, list(cols))
    block_edges: dict[int, np.ndarray] = {}
    owned = np.zeros(window.n_edges, dtype=bool)
    for n in range(first, last + 1):
        lo, hi = h * n, h * (n + 1)
        sel = in_cols & (t_lev >= lo) & (h_lev <= hi) & (t_lev <= hi) & (h_lev >= lo)
        if not window.oriented:
            sel &= ~((t_lev == hi) & (h_lev == hi))  # ceiling belongs to the next block
        idx = np.flatnonzero(sel)
        block_edges[n] = idx
        if owned[idx].any():
            raise GeometryError("block edge sets overlap")
        owned[idx] = True
    ref = block_edges[first]
    for n, idx in block_edges.items():
        if idx.shape != ref.shape:
            raise GeometryError("blocks are not translates of each other")
        shift = h * (n - first) * vb.n_vertices
        if not (np.array_equal(window.tail[idx], window.tail[ref] + shift)
                and np.array_equal(window.head[idx], window.head[ref] + shift)):
            raise GeometryError("blocks are not translates of each other")
    local_class = classes.class_of[ref].copy()
    for n, idx in block_edges.items():
        if not np.array_equal(classes.class_of[idx], local_class):
            raise GeometryError("class labels differ between blocks")
    return BlockGeometry(window, classes, center, radius, tuple(reg), walls, rim, h,
                         tuple(range(first, last + 1)), block_edges,
                         np.flatnonzero(~owned), local_class)


def region_edges_and_vertices(base: BaseGraph, region: Iterable[int]):
    """The (edges, vertices) to distinguish for a block around ``region``."""
    reg = tuple(sorted(set(region)))
    return base.induced_edges(reg), reg
