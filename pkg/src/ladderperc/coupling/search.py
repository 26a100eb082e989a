"""Search for block configurations that defeat a single deterministic anchor.

Two directions are searched against fixed reference cluster functions:

* ``exceeds``: some ``omega`` and ``A`` with ``C(A, omega)`` not inside the
  reference (for oriented blocks the reference is ``x_hat`` with open boundary);
* ``misses``: some ``omega'`` and ``B`` with the reference (``x_hathat`` with
  closed boundary) not inside ``C(B, omega')``.

Cluster functions are unions over singletons, so it suffices to look at
singleton ``A``. Since they are also monotone in the configuration, the
all-open (resp. all-closed) configuration is extremal: if it yields no witness,
no configuration does. Stages run in order: ``extremal``, ``random`` and
(for blocks with few enough edges) ``exhaustive``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import ValidationError
from ..graph import BlockGeometry
from ..percolation import boundary_matrix
from .blocks import BlockLayout, build_xbar, build_xhat_pair
from .measures import as_generator

EXCEEDS, MISSES = "exceeds", "misses"


@dataclass
class Witness:
    direction: str
    stage: str
    local: np.ndarray
    source: int                   # row of the source boundary list
    subset_mask: int
    reference_cluster: list
    found_cluster: list
    minimized: bool = False

    def record(self, block: BlockGeometry) -> dict:
        lay = BlockLayout(block)
        _, t, h, verts = block.local_graph
        open_edges = [[list(verts[t[k]]), list(verts[h[k]])] for k in np.flatnonzero(self.local)]
        return {"direction": self.direction, "stage": self.stage,
                "configuration_hex": np.packbits(self.local, bitorder="little").tobytes().hex(),
                "n_local_edges": int(block.n_local_edges),
                "subset_mask": self.subset_mask,
                "source": list(block.source_boundary(0)[self.source]),
                "reference_cluster": self.reference_cluster,
                "found_cluster": self.found_cluster,
                "open_edges": open_edges if self.local.sum() <= lay.block.n_local_edges // 2
                else None,
                "minimized": self.minimized}


@dataclass
class SearchReport:
    oriented: bool
    n_local_edges: int
    boundary_size: int
    witnesses: dict = field(default_factory=dict)
    examined: dict = field(default_factory=dict)
    exhaustive: dict = field(default_factory=dict)

    def found(self, direction: str) -> bool:
        return self.witnesses.get(direction) is not None

    def summary(self, block: BlockGeometry) -> dict:
        return {"oriented": self.oriented, "n_local_edges": self.n_local_edges,
                "boundary_size": self.boundary_size,
                "examined": self.examined, "exhaustive": self.exhaustive,
                "witnesses": {d: (w.record(block) if w is not None else None)
                              for d, w in self.witnesses.items()}}


def reference_matrices(block: BlockGeometry) -> dict[str, np.ndarray]:
    """Reference singleton cluster matrices for the two directions."""
    if block.oriented:
        pair = build_xhat_pair(block)
        lay = pair.layout
        return {EXCEEDS: boundary_matrix(block, lay.omega_prime(pair.x_hat)),
                MISSES: boundary_matrix(block, lay.omega(pair.x_hathat))}
    xbar = build_xbar(block)
    return {EXCEEDS: boundary_matrix(block, xbar.local(merged=True)),
            MISSES: boundary_matrix(block, xbar.local(merged=False))}


def _bad_rows(direction: str, mat: np.ndarray, ref: np.ndarray) -> np.ndarray:
    bad = mat & ~ref if direction == EXCEEDS else ref & ~mat
    return np.flatnonzero(bad.any(axis=1))


def _mask(row: np.ndarray) -> list[int]:
    return [int(j) for j in np.flatnonzero(row)]


def _make_witness(block, direction, stage, local, row, ref) -> Witness:
    mat = boundary_matrix(block, local)
    return Witness(direction, stage, local.copy(), int(row), 1 << int(row),
                   _mask(ref[row]), _mask(mat[row]))


def minimize_witness(block: BlockGeometry, w: Witness, ref: np.ndarray) -> Witness:
    """Greedy: close (``exceeds``) or open (``misses``) edges while the witness holds."""
    local = w.local.copy()
    target = not (w.direction == EXCEEDS)
    for k in range(local.size):
        if local[k] == target:
            continue
        local[k] = target
        if w.source not in _bad_rows(w.direction, boundary_matrix(block, local), ref):
            local[k] = not target
    out = _make_witness(block, w.direction, w.stage, local, w.source, ref)
    out.minimized = True
    return out


def search_counterexample(block: BlockGeometry, *, stages=("extremal", "random", "exhaustive"),
                          random_budget: int = 2000, open_probability: float = 0.5,
                          exhaustive_limit: int = 20, seed=0, minimize: bool = True) -> SearchReport:
    refs = reference_matrices(block)
    n = block.n_local_edges
    rep = SearchReport(block.oriented, n, len(block.source_boundary(0)))
    rng = as_generator(seed)
    _, t, h, verts = block.local_graph
    pos = {x: i for i, x in enumerate(verts)}
    rows = np.array([pos[x] for x in block.source_boundary(0)], dtype=np.int64)
    cols = np.array([pos[x] for x in block.target_boundary(0)], dtype=np.int64)
    for direction in (EXCEEDS, MISSES):
        ref = refs[direction]
        found = None
        examined = {}
        for stage in stages:
            if found is not None:
                break
            if stage == "extremal":
                local = np.full(n, direction == EXCEEDS)
                bad = _bad_rows(direction, boundary_matrix(block, local), ref)
                examined[stage] = 1
                if bad.size:
                    found = _make_witness(block, direction, stage, local, bad[0], ref)
            elif stage == "random":
                for i in range(random_budget):
                    local = rng.random(n) < open_probability
                    bad = _bad_rows(direction, boundary_matrix(block, local), ref)
                    if bad.size:
                        found = _make_witness(block, direction, stage, local, bad[0], ref)
                        examined[stage] = i + 1
                        break
                else:
                    examined[stage] = random_budget
            elif stage == "exhaustive":
                if n > exhaustive_limit:
                    examined[stage] = 0
                    rep.exhaustive[direction] = "skipped: too many edges"
                    continue
                idx, row = kernels.exhaustive_witness(
                    len(verts), t, h, rows, cols, block.oriented, ref,
                    0 if direction == EXCEEDS else 1)
                examined[stage] = (1 << n) if idx < 0 else int(idx) + 1
                rep.exhaustive[direction] = "complete, no witness" if idx < 0 else "witness"
                if idx >= 0:
                    local = np.array([(idx >> k) & 1 for k in range(n)], dtype=bool)
                    found = _make_witness(block, direction, stage, local, row, ref)
            else:
                raise ValidationError(f"unknown search stage {stage!r}")
        if found is not None and minimize:
            found = minimize_witness(block, found, ref)
        rep.witnesses[direction] = found
        rep.examined[direction] = examined
    return rep


def search_counterexample_oriented(block: BlockGeometry, **kwargs) -> SearchReport:
    if not block.oriented:
        raise ValidationError("oriented search needs an oriented block")
    return search_counterexample(block, **kwargs)


def search_counterexample_unoriented(block: BlockGeometry, **kwargs) -> SearchReport:
    if block.oriented:
        raise ValidationError("unoriented search needs an unoriented block")
    return search_counterexample(block, **kwargs)
