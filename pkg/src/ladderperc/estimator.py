"""Monte Carlo reach estimates, critical-point bisection and q-sweeps.

Every replica ``i`` owns one uniform per window edge, drawn from the stream
``SeedSequence(seed, spawn_key=(i,))``. An edge of class ``c`` is open at
parameters ``(q, p)`` iff its uniform is below ``q_c`` (class edges) or ``p``
(bulk edges). For fixed ``q`` each replica therefore has a critical threshold
``t*``: the query holds at bulk parameter ``p`` iff ``t* < p``. Thresholds are
minimax path weights, computed by a compiled kernel, and turn a whole curve
``p -> P(reach)`` into one pass over the replicas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy.stats import binom, norm

from .errors import ValidationError
from .graph import EdgeClassMap, LadderWindow
from .percolation import (ParamSet, ReachQuery, reach_indicator, reach_threshold,
                          replica_rng, sample_configuration)

DEFAULT_REPLICAS = 10_000
DEFAULT_TOLERANCE = 0.01
SIGNIFICANCE = 0.05


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    replicas: int
    seed: int
    query: str
    p: float | None = None
    q: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("estimate outside [0, 1]")

    @classmethod
    def from_hits(cls, hits: int, replicas: int, seed: int, query: str, p=None, q=()):
        v = hits / replicas
        return cls(v, math.sqrt(v * (1.0 - v) / replicas), replicas, seed, query, p, tuple(q))

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return (self.value - z * self.stderr, self.value + z * self.stderr)


@dataclass
class CriticalCurvePoint:
    q: tuple[float, ...]
    pc_hat: float
    ci: tuple[float, float]
    width: int
    levels: int
    replicas: int
    seed: int
    bracket: tuple[float, float] = (0.0, 1.0)
    iterations: int = 0
    ambiguous_steps: int = 0
    evaluations: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.pc_hat <= 1.0:
            raise ValueError("pc_hat outside [0, 1]")
        if not self.ci[0] <= self.pc_hat <= self.ci[1]:
            raise ValueError("ci must contain pc_hat")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["q"] = list(self.q)
        d["ci"] = list(self.ci)
        d["bracket"] = list(self.bracket)
        return d


class ThresholdSample:
    """Per-replica critical thresholds for fixed ``q``, grown on demand.

    Replica ``i`` always uses the same stream, so extending the sample never
    changes existing thresholds and results do not depend on batch sizes.
    """

    def __init__(self, window: LadderWindow, classes: EdgeClassMap, q: Sequence[float],
                 query: ReachQuery, seed: int, batch: int = 256):
        self.window, self.classes = window, classes
        self.q = tuple(float(x) for x in q)
        ParamSet(0.5, self.q)  # validates the class probabilities
        if len(self.q) != classes.n_classes:
            raise ValidationError(f"{len(self.q)} class probabilities given, "
                                  f"{classes.n_classes} classes defined")
        self.query, self.seed, self.batch = query, int(seed), batch
        self.values = np.zeros(0)

    def extend(self, n: int) -> np.ndarray:
        start = self.values.size
        chunks = [self.values]
        for lo in range(start, n, self.batch):
            hi = min(n, lo + self.batch)
            u = np.empty((hi - lo, self.window.n_edges))
            for r in range(lo, hi):
                u[r - lo] = replica_rng(self.seed, r).random(self.window.n_edges)
            chunks.append(reach_threshold(self.window, self.classes, self.q, self.query, u))
        self.values = np.concatenate(chunks)
        return self.values[:n]

    def hits(self, p: float, n: int) -> int:
        return int(np.count_nonzero(self.extend(n) < p))


def estimate_reach(window: LadderWindow, classes: EdgeClassMap, params: ParamSet,
                   query: ReachQuery, replicas: int = DEFAULT_REPLICAS, seed: int = 0,
                   *, method: str = "threshold") -> Estimate:
    """Fraction of replicas in which the query holds.

    ``method="threshold"`` uses per-replica thresholds; ``method="direct"``
    samples each configuration and runs the reach kernel. Both read the same
    uniforms, so they agree replica by replica.
    """
    if replicas < 1:
        raise ValidationError("replicas must be at least 1")
    if method == "threshold":
        ts = ThresholdSample(window, classes, params.q, query, seed)
        hits = ts.hits(params.p, replicas)
    elif method == "direct":
        hits = sum(reach_indicator(sample_configuration(window, classes, params, seed,
                                                        replica=r), query)
                   for r in range(replicas))
    else:
        raise ValidationError(f"unknown estimation method {method!r}")
    return Estimate.from_hits(hits, replicas, seed, query.describe(), params.p, params.q)


def _median_interval(t: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    """Distribution-free interval for the median from order statistics."""
    n = t.size
    s = np.sort(t)
    lo = int(binom.ppf((1 - level) / 2, n, 0.5))
    hi = int(binom.isf((1 - level) / 2, n, 0.5))
    return float(s[max(lo - 1, 0)]), float(s[min(hi, n - 1)])


def estimate_pc(window: LadderWindow, classes: EdgeClassMap, q: Sequence[float],
                query: ReachQuery | None = None, *, tolerance: float = DEFAULT_TOLERANCE,
                replicas: int = DEFAULT_REPLICAS, max_replicas: int | None = None,
                seed: int = 0, significance: float = SIGNIFICANCE,
                thresholds: ThresholdSample | None = None) -> CriticalCurvePoint:
    """Bisection for the ``p`` where the reach probability crosses one half.

    Each midpoint is tested against ``1/2`` with a two-sided z-test; when the
    test cannot decide, replicas are doubled (up to ``max_replicas``, default
    4x) and the decision falls back to the sign of the estimate. The reported
    interval covers the final bracket and an order-statistic interval for the
    median threshold.
    """
    if not 0.0 < tolerance < 1.0:
        raise ValidationError("tolerance must lie in (0, 1)")
    query = query or ReachQuery.crossing(window)
    ts = thresholds or ThresholdSample(window, classes, q, query, seed)
    cap = max_replicas or 4 * replicas
    z_crit = norm.isf(significance / 2)
    evals = []

    def value(p: float, n: int) -> Estimate:
        return Estimate.from_hits(ts.hits(p, n), n, seed, query.describe(), p, ts.q)

    lo_e, hi_e = value(0.0, replicas), value(1.0, replicas)
    evals += [asdict(lo_e), asdict(hi_e)]
    if not (lo_e.value < 0.5 < hi_e.value):
        raise ValidationError(f"reach probability does not cross 1/2 on [0, 1] "
                              f"(P(0)={lo_e.value}, P(1)={hi_e.value})")
    lo, hi = 0.0, 1.0
    iterations = ambiguous = 0
    max_iter = math.ceil(math.log2(1.0 / tolerance))
    while hi - lo > tolerance and iterations < max_iter:
        mid = 0.5 * (lo + hi)
        n = replicas
        while True:
            e = value(mid, n)
            se = math.sqrt(0.25 / n)
            z = (e.value - 0.5) / se
            if abs(z) >= z_crit or 2 * n > cap:
                break
            n *= 2
        if abs(z) < z_crit:
            ambiguous += 1
        evals.append(asdict(e))
        if e.value > 0.5:
            hi = mid
        else:
            lo = mid
        iterations += 1
    pc = 0.5 * (lo + hi)
    med_lo, med_hi = _median_interval(ts.extend(replicas))
    ci = (min(lo, med_lo), max(hi, med_hi))
    return CriticalCurvePoint(tuple(ts.q), pc, ci, window.base.n_vertices, window.n_levels - 1,
                              replicas, seed, (lo, hi), iterations, ambiguous, evals)


@dataclass
class SweepResult:
    points: list[CriticalCurvePoint]
    max_jump: float
    tolerance: float

    def as_dict(self) -> dict:
        return {"points": [p.as_dict() for p in self.points], "max_jump": self.max_jump,
                "tolerance": self.tolerance}


def sweep_q(window: LadderWindow, classes: EdgeClassMap, q_grid: Sequence[Sequence[float]],
            query: ReachQuery | None = None, *, seed: int = 0,
            tolerance: float = DEFAULT_TOLERANCE, replicas: int = DEFAULT_REPLICAS,
            max_replicas: int | None = None) -> SweepResult:
    """``estimate_pc`` on each grid point with common random numbers (same root seed).

    The diagnostic is the largest change of ``pc_hat`` between neighbouring points.
    """
    for q in q_grid:
        if any(not 0.0 < x < 1.0 for x in q):
            raise ValidationError(f"grid point {q} is outside (0, 1)")
    pts = [estimate_pc(window, classes, q, query, tolerance=tolerance, replicas=replicas,
                       max_replicas=max_replicas, seed=seed) for q in q_grid]
    jumps = [abs(a.pc_hat - b.pc_hat) for a, b in zip(pts, pts[1:])]
    return SweepResult(pts, max(jumps) if jumps else 0.0, tolerance)
