"""Couplings with one anchor or with a partition and two anchors.

Both constructions share one picture. Each measure covers a unit interval:
first the common masses ``min(mu1(y), mu2(y))`` of non-anchor elements in the
same order for both covers, then a *tail* whose pieces are anchor masses and
excess totals ``sum [mu1 - mu2]^+`` (resp. ``[mu2 - mu1]^+``) per part. The
tails are arranged so every overlap of an X-piece with a Y-piece pairs states
allowed by the coupling's clauses.

Single anchor ``x``::

    X tail:  [ x | excess_1 ]            Y tail:  [ excess_2 | x ]

Partition ``S_hat`` / ``S_hathat`` with anchors ``a``, ``b``::

    X tail:  [ a | E1(S_hat) | b | E1(S_hathat) ]
    Y tail:  [ E2(S_hat) | E2(S_hathat) | a | b ]

The *interval* backend lays out individual elements and reads a joint law off
the overlaps (one uniform per sample). The *sequential* backend only needs the
piece-level overlap table: draw X, keep Y = X with probability
``min(1, mu2/mu1)``, otherwise move to X's tail piece, pick a Y piece from the
overlap table and draw Y inside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import HardAssertionError, InfeasibleCouplingError, ValidationError
from .measures import FiniteMeasure, FinitePair, MeasurePair, as_generator

SINGLE = "single-anchor"
PARTITIONED = "partitioned"

SINGLE_CLAUSES = ("X=Y", "X=xbar", "Y=xbar")
PARTITIONED_CLAUSES = ("X=Y", "X=xhat", "X in Shat+{xhathat}, Y=xhat", "Y=xhathat")


@dataclass(frozen=True)
class CouplingOutcome:
    X: object
    Y: object
    case_tag: str


@dataclass(frozen=True)
class Piece:
    kind: str      # "anchor" or "excess"
    index: int     # anchor number or part number
    length: float


@dataclass(frozen=True)
class TailLayout:
    x_tail: tuple[Piece, ...]
    y_tail: tuple[Piece, ...]
    overlap: np.ndarray    # overlap[i, j] of x piece i with y piece j

    def x_piece(self, kind: str, index: int) -> int:
        return next(i for i, p in enumerate(self.x_tail) if (p.kind, p.index) == (kind, index))


def _overlap_table(xs: Sequence[Piece], ys: Sequence[Piece]) -> np.ndarray:
    xb = np.concatenate([[0.0], np.cumsum([p.length for p in xs])])
    yb = np.concatenate([[0.0], np.cumsum([p.length for p in ys])])
    ov = np.zeros((len(xs), len(ys)))
    for i in range(len(xs)):
        for j in range(len(ys)):
            ov[i, j] = max(0.0, min(xb[i + 1], yb[j + 1]) - max(xb[i], yb[j]))
    return ov


def tail_layout(pair: MeasurePair) -> TailLayout:
    m1, m2 = pair.anchor_masses()
    e1, e2 = pair.excess1, pair.excess2
    if len(pair.anchors) == 1:
        xs = (Piece("anchor", 0, m1[0]), Piece("excess", 0, e1[0]))
        ys = (Piece("excess", 0, e2[0]), Piece("anchor", 0, m2[0]))
    else:
        xs = (Piece("anchor", 0, m1[0]), Piece("excess", 0, e1[0]),
              Piece("anchor", 1, m1[1]), Piece("excess", 1, e1[1]))
        ys = (Piece("excess", 0, e2[0]), Piece("excess", 1, e2[1]),
              Piece("anchor", 0, m2[0]), Piece("anchor", 1, m2[1]))
    return TailLayout(xs, ys, _overlap_table(xs, ys))


# ---------------------------------------------------------------------------
# Feasibility
# ---------------------------------------------------------------------------


def _check_anchor_mass(pair: MeasurePair):
    for a, m in zip(pair.anchors, pair.anchor_masses()[0]):
        if not m > 0:
            raise ValidationError("every anchor needs positive mass under the first measure")


def single_report(pair: MeasurePair) -> dict:
    _check_anchor_mass(pair)
    m1, m2 = pair.anchor_masses()
    e1, e2 = pair.excess1[0], pair.excess2[0]
    return {"mode": SINGLE, "mu1_anchor": m1[0], "mu2_anchor": m2[0],
            "excess1": e1, "excess2": e2,
            "feasible": bool(e2 <= m1[0] and e1 <= m2[0])}


def partitioned_report(pair: MeasurePair) -> dict:
    _check_anchor_mass(pair)
    m1, m2 = pair.anchor_masses()
    e_hat, e_hh = pair.excess1
    first = e_hh < m2[1]
    second = e_hh + m1[1] + e_hat < m2[1] + m2[0]
    return {"mode": PARTITIONED, "mu1_xhat": m1[0], "mu1_xhathat": m1[1],
            "mu2_xhat": m2[0], "mu2_xhathat": m2[1],
            "excess1_Shat": e_hat, "excess1_Shathat": e_hh,
            "excess2_Shat": pair.excess2[0], "excess2_Shathat": pair.excess2[1],
            "first_inequality": bool(first), "second_inequality": bool(second),
            "feasible": bool(first and second)}


def _finite_pair(mu1, mu2, anchors, in_first_part=None) -> FinitePair:
    return FinitePair(mu1, mu2, anchors, in_first_part)


def feasibility_single(mu1, mu2=None, anchor=None) -> bool:
    """Excess sums off the anchor fit inside the anchor masses.

    Accepts two :class:`FiniteMeasure` and an anchor, or a prepared pair view.
    """
    pair = mu1 if isinstance(mu1, MeasurePair) else _finite_pair(mu1, mu2, [anchor])
    return single_report(pair)["feasible"]


def feasibility_partitioned(mu1, mu2=None, in_first_part=None, x_hat=None,
                            x_hathat=None) -> bool:
    """Both strict inequalities of the partitioned construction hold."""
    if isinstance(mu1, MeasurePair):
        pair = mu1
    else:
        pair = _partition_pair(mu1, mu2, in_first_part, x_hat, x_hathat)
    return partitioned_report(pair)["feasible"]


def _partition_pair(mu1, mu2, in_first_part, x_hat, x_hathat) -> FinitePair:
    part = np.asarray(in_first_part, dtype=bool)
    if part.shape != (mu1.size,):
        raise ValidationError("partition mask must cover the support")
    if part.all() or not part.any():
        raise ValidationError("the partition must be nontrivial")
    if not part[x_hat] or part[x_hathat]:
        raise ValidationError("x_hat must lie in the first part and x_hathat in the second")
    return FinitePair(mu1, mu2, [x_hat, x_hathat], part)


# ---------------------------------------------------------------------------
# Clause tags
# ---------------------------------------------------------------------------


def case_tag(pair: MeasurePair, x, y) -> str | None:
    """First clause satisfied by ``(x, y)``, or None if none is."""
    if len(pair.anchors) == 1:
        a = pair.anchors[0]
        if pair.same(x, y):
            return SINGLE_CLAUSES[0]
        if pair.same(x, a):
            return SINGLE_CLAUSES[1]
        if pair.same(y, a):
            return SINGLE_CLAUSES[2]
        return None
    a, b = pair.anchors
    if pair.same(x, y):
        return PARTITIONED_CLAUSES[0]
    if pair.same(x, a):
        return PARTITIONED_CLAUSES[1]
    x_in = pair.same(x, b) or (pair.anchor_index(x) < 0 and pair.part_of(x) == 0)
    if x_in and pair.same(y, a):
        return PARTITIONED_CLAUSES[2]
    if pair.same(y, b):
        return PARTITIONED_CLAUSES[3]
    return None


def _require_tag(pair, x, y) -> str:
    tag = case_tag(pair, x, y)
    if tag is None:
        raise HardAssertionError("sampled pair satisfies no clause of the coupling event")
    if len(pair.anchors) == 2 and pair.same(x, pair.anchors[1]) \
            and pair.anchor_index(y) < 0:
        raise HardAssertionError("X is the second anchor but Y is not an anchor")
    return tag


# ---------------------------------------------------------------------------
# Sequential backend
# ---------------------------------------------------------------------------


class SequentialCoupler:
    """Draws coupled pairs using pointwise masses and excess samplers only."""

    def __init__(self, pair: MeasurePair, report: dict):
        if not report["feasible"]:
            raise InfeasibleCouplingError("coupling is infeasible for these measures", report)
        self.pair = pair
        self.report = report
        self.layout = tail_layout(pair)
        ov = self.layout.overlap
        lengths = np.array([p.length for p in self.layout.x_tail])
        with np.errstate(invalid="ignore", divide="ignore"):
            self.transition = np.where(lengths[:, None] > 0, ov / lengths[:, None], 0.0)

    def _y_from_piece(self, j: int, rng):
        piece = self.layout.y_tail[j]
        if piece.kind == "anchor":
            return self.pair.anchors[piece.index]
        return self.pair.sample_excess2(piece.index, rng)

    def _x_piece(self, x) -> int:
        a = self.pair.anchor_index(x)
        if a >= 0:
            return self.layout.x_piece("anchor", a)
        return self.layout.x_piece("excess", self.pair.part_of(x))

    def sample(self, seed) -> CouplingOutcome:
        rng = as_generator(seed)
        pair = self.pair
        x = pair.sample1(rng)
        if pair.anchor_index(x) < 0 and rng.random() < min(1.0, pair.ratio(x)):
            return CouplingOutcome(x, x, _require_tag(pair, x, x))
        row = self.transition[self._x_piece(x)]
        j = int(min(np.searchsorted(np.cumsum(row), rng.random() * row.sum(), side="right"),
                    row.size - 1))
        y = self._y_from_piece(j, rng)
        return CouplingOutcome(x, y, _require_tag(pair, x, y))

    def sample_many_finite(self, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised draws for a :class:`FinitePair` (marginal tests at scale)."""
        pair = self.pair
        if not isinstance(pair, FinitePair):
            raise TypeError("vectorised sampling needs an enumerated pair")
        rng = as_generator(seed)
        m1, m2 = pair.mu1.masses, pair.mu2.masses
        x = pair.mu1.sample(rng, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            keep_p = np.where(m1 > 0, np.minimum(1.0, m2 / np.where(m1 > 0, m1, 1.0)), 0.0)
        keep = (~pair.is_anchor[x]) & (rng.random(n) < keep_p[x])
        y = x.copy()
        anchor_of = np.full(pair.size, -1)
        for i, a in enumerate(pair.anchors):
            anchor_of[a] = i
        xp = np.array([self.layout.x_piece("anchor", anchor_of[v]) if anchor_of[v] >= 0
                       else self.layout.x_piece("excess", pair.part[v])
                       for v in range(pair.size)])
        moving = np.flatnonzero(~keep)
        cdfs = np.cumsum(self.transition, axis=1)
        rows = xp[x[moving]]
        u = rng.random(moving.size) * cdfs[rows, -1]
        js = np.array([min(np.searchsorted(cdfs[r], v, side="right"), cdfs.shape[1] - 1)
                       for r, v in zip(rows, u)], dtype=np.int64)
        for j, piece in enumerate(self.layout.y_tail):
            sel = moving[js == j]
            if not sel.size:
                continue
            if piece.kind == "anchor":
                y[sel] = pair.anchors[piece.index]
            else:
                w = np.where(pair.part == piece.index, pair.exc2, 0.0)
                cdf = np.cumsum(w)
                y[sel] = np.minimum(np.searchsorted(cdf, rng.random(sel.size) * cdf[-1],
                                                    side="right"), pair.size - 1)
        return x, y

    def exact_joint(self) -> np.ndarray:
        """Joint law implied by the sampler's conditional probabilities."""
        pair = self.pair
        if not isinstance(pair, FinitePair):
            raise TypeError("exact joint needs an enumerated pair")
        n = pair.size
        joint = np.zeros((n, n))
        joint[np.arange(n), np.arange(n)] = pair.diag
        for i, xpiece in enumerate(self.layout.x_tail):
            if xpiece.kind == "anchor":
                xs = np.zeros(n)
                xs[pair.anchors[xpiece.index]] = pair.mu1.masses[pair.anchors[xpiece.index]]
            else:
                xs = np.where(pair.part == xpiece.index, pair.exc1, 0.0)
            for j, ypiece in enumerate(self.layout.y_tail):
                t = self.transition[i, j]
                if t == 0:
                    continue
                if ypiece.kind == "anchor":
                    ys = np.zeros(n)
                    ys[pair.anchors[ypiece.index]] = 1.0
                else:
                    w = np.where(pair.part == ypiece.index, pair.exc2, 0.0)
                    ys = w / w.sum()
                joint += t * np.outer(xs, ys)
        return joint


# ---------------------------------------------------------------------------
# Interval backend
# ---------------------------------------------------------------------------


class IntervalCoupler:
    """Element-level layout of both covers over [0, 1] (enumerated supports)."""

    def __init__(self, pair: FinitePair, report: dict):
        if not isinstance(pair, FinitePair):
            raise TypeError("the interval backend needs an enumerated pair")
        if not report["feasible"]:
            raise InfeasibleCouplingError("coupling is infeasible for these measures", report)
        self.pair = pair
        self.report = report
        order = [y for k in range(pair.n_parts) for y in range(pair.size)
                 if pair.part[y] == k and not pair.is_anchor[y]]
        diag = [(y, pair.diag[y]) for y in order]
        layout = tail_layout(pair)
        xs, ys = list(diag), list(diag)
        for piece in layout.x_tail:
            if piece.kind == "anchor":
                a = pair.anchors[piece.index]
                xs.append((a, pair.mu1.masses[a]))
            else:
                xs += [(y, pair.exc1[y]) for y in range(pair.size)
                       if pair.part[y] == piece.index and pair.exc1[y] > 0]
        for piece in layout.y_tail:
            if piece.kind == "anchor":
                a = pair.anchors[piece.index]
                ys.append((a, pair.mu2.masses[a]))
            else:
                ys += [(y, pair.exc2[y]) for y in range(pair.size)
                       if pair.part[y] == piece.index and pair.exc2[y] > 0]
        self.x_cover = xs
        self.y_cover = ys
        self.x_edges = np.concatenate([[0.0], np.cumsum([m for _, m in xs])])
        self.y_edges = np.concatenate([[0.0], np.cumsum([m for _, m in ys])])
        self.x_elem = np.array([e for e, _ in xs], dtype=np.int64)
        self.y_elem = np.array([e for e, _ in ys], dtype=np.int64)

    def atoms(self) -> list[tuple[int, int, float]]:
        """Joint atoms ``(x, y, mass)`` from merging the two breakpoint lists."""
        out = []
        i = j = 0
        xe, ye = self.x_edges, self.y_edges
        while i < len(self.x_cover) and j < len(self.y_cover):
            lo = max(xe[i], ye[j])
            hi = min(xe[i + 1], ye[j + 1])
            if hi > lo:
                out.append((int(self.x_elem[i]), int(self.y_elem[j]), hi - lo))
            if xe[i + 1] <= ye[j + 1]:
                i += 1
            else:
                j += 1
        return out

    def exact_joint(self) -> np.ndarray:
        n = self.pair.size
        joint = np.zeros((n, n))
        for x, y, m in self.atoms():
            joint[x, y] += m
        return joint

    def _locate(self, u):
        xi = np.minimum(np.searchsorted(self.x_edges, u, side="right") - 1, len(self.x_cover) - 1)
        yi = np.minimum(np.searchsorted(self.y_edges, u, side="right") - 1, len(self.y_cover) - 1)
        return self.x_elem[xi], self.y_elem[yi]

    def sample(self, seed) -> CouplingOutcome:
        rng = as_generator(seed)
        u = rng.random() * min(self.x_edges[-1], self.y_edges[-1])
        x, y = self._locate(u)
        return CouplingOutcome(int(x), int(y), _require_tag(self.pair, int(x), int(y)))

    def sample_many_finite(self, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
        rng = as_generator(seed)
        u = rng.random(n) * min(self.x_edges[-1], self.y_edges[-1])
        return self._locate(u)


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


def make_coupler(pair: MeasurePair, backend: str = "auto"):
    report = single_report(pair) if len(pair.anchors) == 1 else partitioned_report(pair)
    if backend == "auto":
        backend = "interval" if isinstance(pair, FinitePair) else "sequential"
    if backend == "interval":
        return IntervalCoupler(pair, report)
    if backend == "sequential":
        return SequentialCoupler(pair, report)
    raise ValidationError(f"unknown coupling backend {backend!r}")


def couple_single(mu1: FiniteMeasure, mu2: FiniteMeasure, anchor: int, seed,
                  backend: str = "interval") -> CouplingOutcome:
    """One draw of ``(X, Y)`` with ``X ~ mu1``, ``Y ~ mu2`` and
    ``X = Y`` or ``X = anchor`` or ``Y = anchor`` surely."""
    return make_coupler(_finite_pair(mu1, mu2, [anchor]), backend).sample(seed)


def couple_partitioned(mu1: FiniteMeasure, mu2: FiniteMeasure, in_first_part, x_hat: int,
                       x_hathat: int, seed, backend: str = "interval") -> CouplingOutcome:
    """One draw with ``X = Y``, ``X = x_hat``, ``X in S_hat + {x_hathat}`` with
    ``Y = x_hat``, or ``Y = x_hathat`` surely; given ``X = x_hathat``, Y is an anchor."""
    pair = _partition_pair(mu1, mu2, in_first_part, x_hat, x_hathat)
    return make_coupler(pair, backend).sample(seed)


def case_codes(pair: FinitePair, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorised :func:`case_tag` on a finite pair: clause index, or -1."""
    xs, ys = np.asarray(xs), np.asarray(ys)
    out = np.full(xs.shape, -1, dtype=np.int64)
    if len(pair.anchors) == 1:
        a = pair.anchors[0]
        conds = [xs == ys, xs == a, ys == a]
    else:
        a, b = pair.anchors
        x_in = (xs == b) | (~pair.is_anchor[xs] & (pair.part[xs] == 0))
        conds = [xs == ys, xs == a, x_in & (ys == a), ys == b]
    for k in reversed(range(len(conds))):
        out[conds[k]] = k
    return out


def joint_audit(pair: FinitePair, joint: np.ndarray, atol: float = 0.0) -> dict:
    """Marginal errors, clause masses and the second-anchor conditional of a joint law."""
    m1, m2 = pair.mu1.masses, pair.mu2.masses
    tv1 = 0.5 * float(np.abs(joint.sum(axis=1) - m1).sum())
    tv2 = 0.5 * float(np.abs(joint.sum(axis=0) - m2).sum())
    clauses = SINGLE_CLAUSES if len(pair.anchors) == 1 else PARTITIONED_CLAUSES
    xs, ys = np.nonzero(joint > atol)
    mass = joint[xs, ys]
    codes = case_codes(pair, xs, ys)
    per_clause = {c: math.fsum(mass[codes == k]) for k, c in enumerate(clauses)}
    bad = np.flatnonzero(codes < 0)
    violations = [[int(xs[i]), int(ys[i]), float(mass[i])] for i in bad]
    out = {"tv_first": tv1, "tv_second": tv2, "total_mass": math.fsum(joint.ravel()),
           "clause_mass": per_clause, "violating_atoms": violations,
           "p_x_equals_y": float(np.trace(joint))}
    if len(pair.anchors) == 2:
        b = pair.anchors[1]
        row = joint[b]
        bad = [int(y) for y in np.flatnonzero(row > atol) if pair.anchor_index(int(y)) < 0]
        out["second_anchor_conditional"] = (
            float(row[list(pair.anchors)].sum() / row.sum()) if row.sum() > 0 else 1.0)
        out["second_anchor_violations"] = bad
    return out
