"""Deterministic block configurations and the block, exterior and window couplings.

Block-local configurations are bool vectors in the local edge order of
:class:`~ladderperc.graph.BlockGeometry` (``block.local_class`` gives the class
of each position, 0 for boundary edges). A coupling state is the tuple
(class bits, first boundary layer, second boundary layer) flattened as
``[class bits | layer 1 | layer 2]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..errors import HardAssertionError, InfeasibleCouplingError, ValidationError
from ..graph import BlockGeometry, GeometryError, Vertex
from ..percolation import (Configuration, ParamSet, ReachQuery, boundary_matrix,
                           reach_indicator, subset_violation)
from .lemmas import CouplingOutcome, make_coupler
from .measures import ProductBernoulli, ProductPair, as_generator


# ---------------------------------------------------------------------------
# Block state layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockLayout:
    """Maps coupling states of a block to block-local configurations."""

    block: BlockGeometry

    @cached_property
    def class_pos(self) -> np.ndarray:
        return np.flatnonzero(self.block.local_class > 0)

    @cached_property
    def bnd_pos(self) -> np.ndarray:
        return np.flatnonzero(self.block.local_class == 0)

    @cached_property
    def local_levels(self) -> np.ndarray:
        """Level of the lower endpoint of each local edge."""
        _, t, h, verts = self.block.local_graph
        lv = np.array([x[1] for x in verts])
        return np.minimum(lv[t], lv[h])

    @cached_property
    def local_index(self) -> dict[tuple[Vertex, Vertex], int]:
        _, t, h, verts = self.block.local_graph
        out = {}
        for k in range(t.shape[0]):
            a, b = verts[t[k]], verts[h[k]]
            out[(a, b)] = k
            if not self.block.oriented:
                out[(b, a)] = k
        return out

    @cached_property
    def gate_mask(self) -> np.ndarray:
        """Oriented class edges from height K to K+1."""
        K = len(self.block.classes.distinguished_edges)
        return (self.block.local_class > 0) & (self.local_levels == K)

    @property
    def n_class(self) -> int:
        return int(self.class_pos.size)

    @property
    def n_bnd(self) -> int:
        return int(self.bnd_pos.size)

    @property
    def n_state(self) -> int:
        return self.n_class + 2 * self.n_bnd

    def state(self, class_part: np.ndarray, layer1: np.ndarray, layer2: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(class_part, bool), np.asarray(layer1, bool),
                               np.asarray(layer2, bool)])

    def split(self, state: np.ndarray):
        c, b = self.n_class, self.n_bnd
        return state[:c], state[c:c + b], state[c + b:]

    def state_from_local(self, local: np.ndarray, layer2: np.ndarray | None = None) -> np.ndarray:
        local = np.asarray(local, bool)
        l2 = np.zeros(self.n_bnd, bool) if layer2 is None else layer2
        return self.state(local[self.class_pos], local[self.bnd_pos], l2)

    def omega(self, state: np.ndarray) -> np.ndarray:
        """First-model block configuration: class bits and layer 1."""
        cls, l1, _ = self.split(state)
        out = np.zeros(self.block.n_local_edges, bool)
        out[self.class_pos] = cls
        out[self.bnd_pos] = l1
        return out

    def omega_prime(self, state: np.ndarray) -> np.ndarray:
        """Second-model block configuration: class bits and layer 1 OR layer 2."""
        cls, l1, l2 = self.split(state)
        out = np.zeros(self.block.n_local_edges, bool)
        out[self.class_pos] = cls
        out[self.bnd_pos] = l1 | l2
        return out

    def groups(self, split_gates: bool) -> tuple[np.ndarray, list[int], list[int]]:
        """Group index per state bit, class of each class group, gate groups.

        Group ``g < G_c`` is a class group; the last two are the boundary layers.
        """
        cls = self.block.local_class[self.class_pos]
        n_cls = self.block.classes.n_classes
        if split_gates:
            gate = self.gate_mask[self.class_pos]
            g = 2 * (cls - 1) + gate.astype(np.int64)
            class_of_group = [c for c in range(1, n_cls + 1) for _ in range(2)]
            gates = [2 * (c - 1) + 1 for c in range(1, n_cls + 1)]
        else:
            g = cls - 1
            class_of_group = list(range(1, n_cls + 1))
            gates = []
        n_cg = len(class_of_group)
        group_of = np.concatenate([g, np.full(self.n_bnd, n_cg), np.full(self.n_bnd, n_cg + 1)])
        return group_of.astype(np.int64), class_of_group, gates

    def measure(self, q, p: float, epsilon: float, split_gates: bool) -> ProductBernoulli:
        group_of, class_of_group, _ = self.groups(split_gates)
        probs = [q[c - 1] for c in class_of_group] + [p, epsilon / (1.0 - p)]
        return ProductBernoulli(group_of, np.array(probs, dtype=float))


# ---------------------------------------------------------------------------
# Deterministic configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class XBar:
    """The unoriented anchor: state, ordering of U and the paths used."""

    layout: BlockLayout
    state: np.ndarray
    w_order: tuple[int, ...]
    paths: tuple[tuple[int, ...], ...]
    checks: dict = field(default_factory=dict)

    @property
    def class_bits(self) -> np.ndarray:
        return self.layout.split(self.state)[0]

    def local(self, merged: bool = False) -> np.ndarray:
        return self.layout.omega_prime(self.state) if merged else self.layout.omega(self.state)


@dataclass(frozen=True, eq=False)
class XHatPair:
    layout: BlockLayout
    x_hat: np.ndarray
    x_hathat: np.ndarray
    checks: dict = field(default_factory=dict)


def _ordered_region(block: BlockGeometry) -> tuple[int, ...]:
    base = block.window.base
    outside = [v for v in base.vertices if v not in set(block.region)]
    dist = base.distances_from(outside)
    return tuple(sorted(block.region, key=lambda v: (int(dist[v]), v)))


def build_xbar(block: BlockGeometry, *, verify: bool = True) -> XBar:
    """Open the staircase of vertical segments, paths to the rim and middle layer.

    With ``w_1..w_L`` the region ordered by distance to its complement (ties by
    id), each ``w_j`` gets its column open over ``[0, j]`` and ``[h - j, h]``,
    and a lexicographically smallest shortest path to the rim open at heights
    ``j`` and ``h - j``. Every edge inside ``U`` at height ``L + 1`` is open.
    Boundary layers are ``0`` and ``1``.
    """
    if block.oriented:
        raise ValidationError("build_xbar needs an unoriented block")
    lay = BlockLayout(block)
    base = block.window.base
    L = len(block.region)
    h = block.height
    idx = lay.local_index
    w_order = _ordered_region(block)
    rim = set(block.rim)
    local = np.zeros(block.n_local_edges, bool)

    def open_edge(a: Vertex, b: Vertex):
        local[idx[(a, b)]] = True

    paths = []
    for j, w in enumerate(w_order, start=1):
        for m in list(range(0, j)) + list(range(h - j, h)):
            open_edge((w, m), (w, m + 1))
        path = tuple(base.shortest_path(w, rim))
        paths.append(path)
        for a, b in zip(path, path[1:]):
            for m in (j, h - j):
                open_edge((a, m), (b, m))
    for a, b in base.induced_edges(block.region):
        open_edge((a, L + 1), (b, L + 1))
    if np.any(local[lay.bnd_pos]):
        raise GeometryError("x-bar opened a boundary edge")
    state = lay.state(local[lay.class_pos], np.zeros(lay.n_bnd, bool), np.ones(lay.n_bnd, bool))
    xbar = XBar(lay, state, w_order, tuple(paths))
    if verify:
        xbar.checks.update(verify_xbar(xbar))
    return xbar


def verify_xbar(xbar: XBar, literal: bool | None = None) -> dict:
    """Check ``C(A, (xbar^U, 0)) = A`` and ``C(A, (xbar^U, 1)) = boundary`` for all A."""
    block = xbar.layout.block
    b = len(block.boundary(0))
    m_closed = boundary_matrix(block, xbar.local(merged=False))
    m_open = boundary_matrix(block, xbar.local(merged=True))
    ident = np.eye(b, dtype=bool)
    full = np.ones((b, b), dtype=bool)
    lit = b <= 24 if literal is None else literal
    bad_closed = subset_violation(m_closed, ident, equality=True, literal=lit)
    bad_open = subset_violation(m_open, full, equality=True, literal=lit)
    report = {"boundary_size": b, "method": "all subsets" if lit else "singletons",
              "isolates_every_subset": bad_closed is None,
              "connects_every_subset": bad_open is None}
    if bad_closed is not None or bad_open is not None:
        raise GeometryError(f"x-bar identities fail: {report}")
    return report


def build_xhat_pair(block: BlockGeometry, *, verify: bool = True) -> XHatPair:
    """``x_hat`` closes exactly the class edges from height K to K+1; ``x_hathat``
    opens every class edge. Both use boundary layers ``0`` and ``1``."""
    if not block.oriented:
        raise ValidationError("build_xhat_pair needs an oriented block")
    lay = BlockLayout(block)
    if lay.n_class == 0:
        raise ValidationError("the region holds no edge, so there is no class to gate")
    gate = lay.gate_mask[lay.class_pos]
    zeros, ones = np.zeros(lay.n_bnd, bool), np.ones(lay.n_bnd, bool)
    pair = XHatPair(lay, lay.state(~gate, zeros, ones), lay.state(np.ones(lay.n_class, bool),
                                                                   zeros, ones))
    if verify:
        pair.checks.update(verify_xhat_pair(pair))
    return pair


def verify_xhat_pair(pair: XHatPair, literal: bool | None = None) -> dict:
    """``C(A, (x_hathat^U, 0)) <= C(A, (x_hat^U, 1))`` for every ``A``."""
    lay = pair.layout
    block = lay.block
    m_small = boundary_matrix(block, lay.omega(pair.x_hathat))
    m_large = boundary_matrix(block, lay.omega_prime(pair.x_hat))
    b = m_small.shape[0]
    lit = b <= 24 if literal is None else literal
    bad = subset_violation(m_small, m_large, literal=lit)
    report = {"boundary_size": b, "method": "all subsets" if lit else "singletons",
              "containment": bad is None}
    if bad is not None:
        raise GeometryError(f"x-hat containment fails for subset mask {bad}")
    return report


# ---------------------------------------------------------------------------
# Block couplings
# ---------------------------------------------------------------------------


@dataclass
class BlockSample:
    omega: np.ndarray
    omega_prime: np.ndarray
    outcome: CouplingOutcome
    containment: bool = True
    violating_subset: int | None = None

    def record(self, index: int | None = None) -> dict:
        out = {"case": self.outcome.case_tag, "containment": self.containment}
        if index is not None:
            out = {"sample": index, **out}
        if self.violating_subset is not None:
            out["violating_subset"] = self.violating_subset
        return out


def _validate_params(block: BlockGeometry, q, q_prime, p: float, epsilon: float):
    n = block.classes.n_classes
    ParamSet(p, tuple(q), epsilon)
    ParamSet(p + epsilon, tuple(q_prime))
    if len(q) != n or len(q_prime) != n:
        raise ValidationError(f"expected {n} class probabilities")


class BlockCoupler:
    """Coupled block configurations for ``(q, p)`` and ``(q', p + epsilon)``.

    Unoriented blocks use the single-anchor coupling with ``x-bar``; oriented
    blocks use the partitioned coupling with ``x_hat`` and ``x_hathat``, where
    the first part is "every gate edge closed".
    """

    def __init__(self, block: BlockGeometry, q, q_prime, p: float, epsilon: float, *,
                 backend: str = "sequential", budget: int = 1 << 20, check: bool = True,
                 literal: bool | None = None):
        _validate_params(block, q, q_prime, p, epsilon)
        self.block = block
        self.layout = BlockLayout(block)
        self.check = check
        self.literal = literal
        split = block.oriented
        mu1 = self.layout.measure(q, p, epsilon, split)
        mu2 = self.layout.measure(q_prime, p, epsilon, split)
        if block.oriented:
            self.anchors = build_xhat_pair(block)
            anchors = [self.anchors.x_hat, self.anchors.x_hathat]
            gates = self.layout.groups(True)[2]
            self.pair = ProductPair(mu1, mu2, anchors, gate_groups=gates, budget=budget)
        else:
            self.anchors = build_xbar(block)
            self.pair = ProductPair(mu1, mu2, [self.anchors.state], budget=budget)
        if backend == "interval":
            self.pair = _to_finite(self.pair)
        self.coupler = make_coupler(self.pair, backend)
        self.report = self.coupler.report

    def sample(self, seed) -> BlockSample:
        rng = as_generator(seed)
        out = self.coupler.sample(rng)
        x, y = out.X, out.Y
        if isinstance(x, (int, np.integer)):
            x, y = self._states[x], self._states[y]
        s = BlockSample(self.layout.omega(x), self.layout.omega_prime(y), out)
        if self.check:
            bad = subset_violation(boundary_matrix(self.block, s.omega),
                                   boundary_matrix(self.block, s.omega_prime),
                                   literal=self.literal)
            s.containment = bad is None
            s.violating_subset = bad
        return s

    @property
    def _states(self):
        return self.pair.states


def _to_finite(pair: ProductPair):
    """Enumerate a tiny product pair into a finite pair (interval backend)."""
    from .measures import FiniteMeasure, FinitePair

    states = pair.enumerate_support()
    m1 = np.array([pair.mass1(s) for s in states])
    m2 = np.array([pair.mass2(s) for s in states])
    anchors = [next(i for i, s in enumerate(states) if np.array_equal(s, a)) for a in pair.anchors]
    part = None
    if pair.n_parts == 2:
        part = np.array([pair.part_of(s) == 0 for s in states])
    fp = FinitePair(FiniteMeasure(m1 / m1.sum()), FiniteMeasure(m2 / m2.sum()), anchors, part)
    fp.states = states
    return fp


def couple_block_unoriented(block: BlockGeometry, q, q_prime, p: float, epsilon: float,
                            seed, **kwargs) -> BlockSample:
    if block.oriented:
        raise ValidationError("couple_block_unoriented needs an unoriented block")
    return BlockCoupler(block, q, q_prime, p, epsilon, **kwargs).sample(seed)


def couple_block_oriented(block: BlockGeometry, q, q_prime, p: float, epsilon: float,
                          seed, **kwargs) -> BlockSample:
    if not block.oriented:
        raise ValidationError("couple_block_oriented needs an oriented block")
    return BlockCoupler(block, q, q_prime, p, epsilon, **kwargs).sample(seed)


# ---------------------------------------------------------------------------
# Exterior and window couplings
# ---------------------------------------------------------------------------


def couple_exterior(n_edges: int, p: float, epsilon: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """``omega = Z1``, ``omega' = Z1 OR Z2`` with ``Z1 ~ p`` and ``Z2 ~ epsilon / (1 - p)``."""
    if not 0.0 < epsilon < 1.0 - p:
        raise ValidationError(f"epsilon={epsilon} outside (0, 1 - p)")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p={p} outside [0, 1]")
    rng = as_generator(seed)
    z1 = rng.random(n_edges) < p
    z2 = rng.random(n_edges) < epsilon / (1.0 - p)
    return z1, z1 | z2


@dataclass
class WindowSample:
    omega: Configuration
    omega_prime: Configuration
    block_samples: dict[int, BlockSample]
    reach: tuple[bool, bool] | None = None

    def record(self, index: int | None = None) -> dict:
        out = {"cases": {str(n): s.outcome.case_tag for n, s in self.block_samples.items()},
               "containment": all(s.containment for s in self.block_samples.values())}
        if self.reach is not None:
            out["reach"] = list(self.reach)
            out["implication"] = (not self.reach[0]) or self.reach[1]
        if index is not None:
            out = {"sample": index, **out}
        return out


class WindowCoupler:
    """Independent block couplings on every block plus the exterior coupling.

    The window must consist of whole blocks. Class edges outside every block
    (the top ceiling layer of an unoriented window) get a shared uniform, which
    matches both marginals; they sit on the top level, so level queries ending
    there never need them.
    """

    def __init__(self, block: BlockGeometry, q, q_prime, p: float, epsilon: float,
                 **block_kwargs):
        w = block.window
        h = block.height
        if w.n_min != h * block.block_numbers[0] or w.n_max != h * (block.block_numbers[-1] + 1):
            raise ValidationError(f"window levels [{w.n_min}, {w.n_max}] are not a whole "
                                  f"number of blocks of height {h}")
        self.block = block
        self.q = tuple(q)
        self.q_prime = tuple(q_prime)
        self.p, self.epsilon = p, epsilon
        self.blocks = BlockCoupler(block, q, q_prime, p, epsilon, **block_kwargs)
        ext = block.exterior_edges
        cls = block.classes.class_of[ext]
        self.ext_bulk = ext[cls == 0]
        self.ext_class = ext[cls > 0]
        top = w.level[self.ext_class]
        if self.ext_class.size and not np.all(
                (top == w.n_max) & (w.kind[self.ext_class] == 0)):
            raise GeometryError("class edges outside the blocks below the top ceiling")
        self.report = self.blocks.report

    def check_query(self, query: ReachQuery):
        """Sources and targets must avoid block interiors (else containment says nothing)."""
        region = set(self.block.region)
        h = self.block.height
        for v, n in list(query.sources) + list(query.target_vertices):
            if v in region and n % h != 0:
                raise ValidationError(f"query vertex {(v, n)} is inside a block")
        if query.target_level is not None and query.target_level != self.block.window.n_max:
            if query.target_level % h != 0:
                raise ValidationError("target level must be a block boundary level")

    def sample(self, seed, query: ReachQuery | None = None) -> WindowSample:
        rng = as_generator(seed)
        w = self.block.window
        omega = np.zeros(w.n_edges, bool)
        omega_p = np.zeros(w.n_edges, bool)
        samples = {}
        for n in self.block.block_numbers:
            s = self.blocks.sample(rng)
            idx = self.block.block_edges[n]
            omega[idx] = s.omega
            omega_p[idx] = s.omega_prime
            samples[n] = s
        z, zp = couple_exterior(self.ext_bulk.size, self.p, self.epsilon, rng)
        omega[self.ext_bulk] = z
        omega_p[self.ext_bulk] = zp
        if self.ext_class.size:
            u = rng.random(self.ext_class.size)
            c = self.block.classes.class_of[self.ext_class]
            omega[self.ext_class] = u < np.array(self.q)[c - 1]
            omega_p[self.ext_class] = u < np.array(self.q_prime)[c - 1]
        out = WindowSample(Configuration(w, omega), Configuration(w, omega_p), samples)
        if query is not None:
            out.reach = (reach_indicator(out.omega, query), reach_indicator(out.omega_prime, query))
        return out


def couple_window(block: BlockGeometry, q, q_prime, p: float, epsilon: float, seed,
                  query: ReachQuery | None = None, **block_kwargs) -> WindowSample:
    """One coupled pair of window configurations.

    With a ``query`` the reach implication ``omega reaches => omega' reaches`` is
    asserted and a violation raises :class:`HardAssertionError`.
    """
    wc = WindowCoupler(block, q, q_prime, p, epsilon, **block_kwargs)
    if query is not None:
        wc.check_query(query)
    s = wc.sample(seed, query)
    if s.reach is not None and s.reach[0] and not s.reach[1]:
        raise HardAssertionError("reach implication violated", s.record())
    return s


__all__ = ["BlockLayout", "XBar", "XHatPair", "build_xbar", "build_xhat_pair",
           "verify_xbar", "verify_xhat_pair", "BlockCoupler", "BlockSample",
           "couple_block_unoriented", "couple_block_oriented", "couple_exterior",
           "WindowCoupler", "WindowSample", "couple_window"]
