"""Ground truth by exhaustive enumeration on tiny instances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coupling.blocks import BlockLayout, build_xbar, build_xhat_pair
from .coupling.lemmas import (IntervalCoupler, SequentialCoupler, joint_audit,
                              partitioned_report, single_report)
from .coupling.measures import FinitePair
from .errors import BudgetExceededError, InfeasibleCouplingError
from .graph import BlockGeometry, EdgeClassMap, LadderWindow
from .percolation import ParamSet, ReachQuery, boundary_matrix, subset_violation


@dataclass(frozen=True)
class EnumerationBudget:
    max_edges: int = 22
    max_support: int = 1 << 16

    def __post_init__(self):
        if self.max_edges <= 0 or self.max_support <= 0:
            raise ValueError("budgets must be positive")

    def check_edges(self, m: int):
        if m > self.max_edges:
            raise BudgetExceededError(f"{m} edges exceed the enumeration budget of "
                                      f"{self.max_edges}")

    def check_support(self, n: int):
        if n > self.max_support:
            raise BudgetExceededError(f"support of size {n} exceeds the budget of "
                                      f"{self.max_support}")


def exact_reach_probability(window: LadderWindow, classes: EdgeClassMap, params: ParamSet,
                            query: ReachQuery, budget: EnumerationBudget = EnumerationBudget(),
                            n_chunks: int = 64) -> dict:
    """Sum of product masses over all ``2**M`` configurations where the query holds.

    Chunks of configuration indices are summed with compensation in parallel;
    chunk totals are then combined in index order with ``math.fsum``.
    """
    m = window.n_edges
    budget.check_edges(m)
    prob = params.edge_probabilities(classes)
    with np.errstate(divide="ignore"):
        log_p1 = np.log(prob)
        log_p0 = np.log1p(-prob)
    src, tgt = query.masks(window)
    n_chunks = max(1, min(n_chunks, 1 << m))
    hits, masses = kernels.enumerate_reach_mass(window.n_vertices, window.tail, window.head,
                                                log_p1, log_p0, src, tgt, window.oriented,
                                                n_chunks)
    value = math.fsum(hits.tolist())
    total = math.fsum(masses.tolist())
    return {"probability": value, "total_mass": total, "n_edges": m,
            "configurations": 1 << m, "query": query.describe()}


def exact_coupling_audit(pair: FinitePair, backend: str = "interval",
                         budget: EnumerationBudget = EnumerationBudget()) -> dict:
    """Enumerate a construction's joint law and audit it.

    Reports marginal total-variation errors, the mass of each clause, any atom
    outside the clauses and, with two anchors, the conditional law of Y given
    that X is the second anchor.
    """
    budget.check_support(pair.size)
    report = single_report(pair) if len(pair.anchors) == 1 else partitioned_report(pair)
    if not report["feasible"]:
        raise InfeasibleCouplingError("coupling is infeasible for these measures", report)
    cls = IntervalCoupler if backend == "interval" else SequentialCoupler
    coupler = cls(pair, report)
    joint = coupler.exact_joint()
    out = joint_audit(pair, joint)
    out.update({"backend": backend, "feasibility": report, "support_size": pair.size})
    if backend == "interval":
        out["atoms"] = len(coupler.atoms())
    return out


def _case_pairs(block: BlockGeometry) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Extremal (omega, omega') per anchor case; monotonicity covers the rest of each case."""
    lay = BlockLayout(block)
    n = block.n_local_edges
    all_open, all_closed = np.ones(n, bool), np.zeros(n, bool)
    if block.oriented:
        pair = build_xhat_pair(block)
        xh0, xh1 = lay.omega(pair.x_hat), lay.omega_prime(pair.x_hat)
        xhh0 = lay.omega(pair.x_hathat)
        top_hat = xh1.copy()  # largest X in S_hat: gates closed, all else open
        return {"X=xhat": (xh0, all_closed),
                "X in Shat, Y=xhat": (top_hat, xh1),
                "X=xhathat, Y=xhat": (xhh0, xh1),
                "Y=xhathat": (all_open, lay.omega_prime(pair.x_hathat))}
    xbar = build_xbar(block)
    return {"X=xbar": (xbar.local(False), all_closed),
            "Y=xbar": (all_open, xbar.local(True))}


def exhaustive_containment_check(block: BlockGeometry, pairs=None, *, mode: str = "cases",
                                 budget: EnumerationBudget = EnumerationBudget(),
                                 max_literal_boundary: int = 24) -> dict:
    """Verify ``C(A, omega) <= C(A, omega')`` over all nonempty ``A``.

    ``mode="pairs"`` checks the supplied ``(omega, omega')`` pairs. ``mode="cases"``
    checks the anchor cases of the block coupling through their extremal
    configurations. ``mode="exhaustive"`` lets the free side of each anchor case
    range over every block configuration (budget permitting).
    Subsets are visited literally when the boundary has at most
    ``max_literal_boundary`` vertices, otherwise through singletons.
    """
    b = len(block.source_boundary(0))
    literal = b <= max_literal_boundary
    results = {}
    failures = []

    def check(name, small, large):
        bad = subset_violation(boundary_matrix(block, small), boundary_matrix(block, large),
                               literal=literal)
        results[name] = bad is None
        if bad is not None:
            failures.append({"case": name, "subset_mask": int(bad)})

    if mode == "pairs":
        for i, (w0, w1) in enumerate(pairs or ()):
            check(f"pair {i}", np.asarray(w0, bool), np.asarray(w1, bool))
    elif mode == "cases":
        for name, (w0, w1) in _case_pairs(block).items():
            check(name, w0, w1)
    elif mode == "exhaustive":
        m = block.n_local_edges
        budget.check_edges(m)
        _, t, h, verts = block.local_graph
        pos = {x: i for i, x in enumerate(verts)}
        rows = np.array([pos[x] for x in block.source_boundary(0)], dtype=np.int64)
        cols = np.array([pos[x] for x in block.target_boundary(0)], dtype=np.int64)
        for name, (w0, w1) in _case_pairs(block).items():
            fixed_small = name in ("X=xbar", "X=xhat")
            if fixed_small:
                ref, direction = boundary_matrix(block, w0), 1
            else:
                ref, direction = boundary_matrix(block, w1), 0
            if name in ("X in Shat, Y=xhat", "X=xhathat, Y=xhat"):
                # omega ranges over a fixed family; its extremal element suffices
                check(name, w0, w1)
                continue
            idx, row = kernels.exhaustive_witness(len(verts), t, h, rows, cols,
                                                  block.oriented, ref, direction)
            results[name] = idx < 0
            if idx >= 0:
                failures.append({"case": name, "configuration": int(idx), "row": int(row)})
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = {"mode": mode, "boundary_size": b,
           "subsets": "all" if literal else "singletons (union property)",
           "results": results, "failures": failures, "ok": not failures}
    if mode == "exhaustive":
        out["configurations_per_case"] = 1 << block.n_local_edges
    return out
