"""Measures on finite sets and the pair views the coupling samplers consume.

A *pair view* bundles two measures with their anchor elements and exposes the
few quantities the couplings need: anchor masses, excess totals per part,
pointwise likelihood ratios and samplers for the excess laws. Two views exist:
:class:`FinitePair` for explicitly enumerated supports and :class:`ProductPair`
for product Bernoulli measures, where excess totals come from enumerating open
counts per group rather than configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from ..errors import BudgetExceededError, ValidationError

MASS_TOLERANCE = 1e-12


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    """Explicit masses over the support ``0..n-1`` (optionally labelled)."""

    masses: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValidationError("masses must be a nonempty vector")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValidationError("masses must be finite and nonnegative")
        if abs(math.fsum(m) - 1.0) > MASS_TOLERANCE:
            raise ValidationError(f"masses sum to {math.fsum(m)!r}, not 1")
        if self.labels is not None and len(self.labels) != m.size:
            raise ValidationError("one label per support element required")
        object.__setattr__(self, "masses", m)

    @property
    def size(self) -> int:
        return int(self.masses.size)

    def mass(self, y: int) -> float:
        return float(self.masses[y])

    def index(self, label) -> int:
        if self.labels is None:
            return int(label)
        return self.labels.index(label)

    def sample(self, seed, size: int | None = None):
        rng = as_generator(seed)
        cdf = np.cumsum(self.masses)
        u = rng.random(size) * cdf[-1]
        return np.minimum(np.searchsorted(cdf, u, side="right"), self.size - 1)


@dataclass(frozen=True, eq=False)
class ProductBernoulli:
    """Independent bits; bit ``k`` is open with probability ``probs[group_of[k]]``."""

    group_of: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.group_of, dtype=np.int64)
        p = np.asarray(self.probs, dtype=float)
        if g.size and (g.min() < 0 or g.max() >= p.size):
            raise ValidationError("group index out of range")
        if np.any((p < 0) | (p > 1)):
            raise ValidationError("bit probabilities must lie in [0, 1]")
        object.__setattr__(self, "group_of", g)
        object.__setattr__(self, "probs", p)

    @property
    def n_bits(self) -> int:
        return int(self.group_of.size)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group_of, minlength=self.probs.size)

    def counts(self, bits: np.ndarray) -> np.ndarray:
        return np.bincount(self.group_of, weights=np.asarray(bits, dtype=float),
                           minlength=self.probs.size).astype(np.int64)

    def log_mass(self, bits: np.ndarray) -> float:
        return float(log_count_mass(self.counts(bits), self.group_sizes, self.probs))

    def mass(self, bits: np.ndarray) -> float:
        return math.exp(self.log_mass(bits))

    def sample(self, seed) -> np.ndarray:
        rng = as_generator(seed)
        return rng.random(self.n_bits) < self.probs[self.group_of]


def log_count_mass(k, n, p) -> np.ndarray:
    """Log mass of one configuration with ``k`` open bits out of ``n`` per group.

    Broadcasts over a leading axis of count vectors (``k`` shaped (..., G)).
    """
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(k > 0, k * np.log(p), 0.0)
        b = np.where(n - k > 0, (n - k) * np.log1p(-p), 0.0)
    return np.sum(a + b, axis=-1)


def positive_gap(log_a, log_b):
    """``[exp(log_a) - exp(log_b)]^+`` without cancellation."""
    log_a = np.asarray(log_a, dtype=float)
    log_b = np.asarray(log_b, dtype=float)
    out = np.zeros(np.broadcast(log_a, log_b).shape)
    pos = log_a > log_b
    with np.errstate(invalid="ignore", over="ignore"):
        val = np.exp(log_a) * -np.expm1(log_b - log_a)
    out[pos] = np.broadcast_to(val, out.shape)[pos]
    return out


# ---------------------------------------------------------------------------
# Pair views
# ---------------------------------------------------------------------------


class MeasurePair:
    """Common interface of the two pair views.

    Elements are ints (finite) or bit vectors (product). ``anchors`` holds one
    element (single anchor) or two (``x_hat``, ``x_hathat``); ``part_of`` maps a
    non-anchor element to 0 (the part holding the first anchor) or 1.
    """

    anchors: tuple
    n_parts: int

    def mass1(self, y) -> float: ...
    def mass2(self, y) -> float: ...
    def ratio(self, y) -> float: ...
    def part_of(self, y) -> int: ...
    def sample1(self, rng: np.random.Generator): ...
    def sample_excess2(self, part: int, rng: np.random.Generator): ...
    def same(self, a, b) -> bool: ...

    def anchor_index(self, y) -> int:
        for i, a in enumerate(self.anchors):
            if self.same(a, y):
                return i
        return -1

    def anchor_masses(self) -> tuple[list[float], list[float]]:
        return ([self.mass1(a) for a in self.anchors], [self.mass2(a) for a in self.anchors])

    excess1: tuple[float, ...]
    excess2: tuple[float, ...]


class FinitePair(MeasurePair):
    """Two :class:`FiniteMeasure` on the same support with explicit anchors."""

    def __init__(self, mu1: FiniteMeasure, mu2: FiniteMeasure, anchors: Sequence[int],
                 in_first_part: np.ndarray | None = None):
        if mu1.size != mu2.size:
            raise ValidationError("the two measures must share their support")
        self.mu1, self.mu2 = mu1, mu2
        self.anchors = tuple(int(a) for a in anchors)
        n = mu1.size
        for a in self.anchors:
            if not 0 <= a < n:
                raise ValidationError(f"anchor {a} outside the support")
        if in_first_part is None:
            part = np.zeros(n, dtype=np.int64)
            self.n_parts = 1
        else:
            part = np.where(np.asarray(in_first_part, dtype=bool), 0, 1)
            self.n_parts = 2
        self.part = part
        self.is_anchor = np.zeros(n, dtype=bool)
        self.is_anchor[list(self.anchors)] = True
        m1, m2 = mu1.masses, mu2.masses
        self.diag = np.where(self.is_anchor, 0.0, np.minimum(m1, m2))
        self.exc1 = np.where(self.is_anchor, 0.0, np.maximum(m1 - m2, 0.0))
        self.exc2 = np.where(self.is_anchor, 0.0, np.maximum(m2 - m1, 0.0))
        self.excess1 = tuple(math.fsum(self.exc1[part == k]) for k in range(self.n_parts))
        self.excess2 = tuple(math.fsum(self.exc2[part == k]) for k in range(self.n_parts))

    @property
    def size(self) -> int:
        return self.mu1.size

    def mass1(self, y):
        return self.mu1.mass(y)

    def mass2(self, y):
        return self.mu2.mass(y)

    def ratio(self, y):
        m1 = self.mu1.masses[y]
        return float(self.mu2.masses[y] / m1) if m1 > 0 else math.inf

    def part_of(self, y):
        return int(self.part[y])

    def same(self, a, b):
        return int(a) == int(b)

    def sample1(self, rng):
        return int(self.mu1.sample(rng))

    def sample_excess2(self, part, rng):
        w = np.where(self.part == part, self.exc2, 0.0)
        cdf = np.cumsum(w)
        return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), self.size - 1))


@dataclass
class _CountTable:
    counts: np.ndarray       # (n_vec, n_relevant)
    log_mult: np.ndarray     # log number of configurations per count vector
    log1: np.ndarray
    log2: np.ndarray
    part: np.ndarray
    cdf2: list = field(default_factory=list)


class ProductPair(MeasurePair):
    """Two product Bernoulli measures with a shared bit layout.

    Groups whose probabilities agree factor out of every likelihood ratio, so
    excess totals are sums over open-count vectors of the remaining groups
    (plus ``gate_groups``, which decide the part: part 0 is "all gate bits
    closed"). The number of count vectors is capped by ``budget``.
    """

    def __init__(self, mu1: ProductBernoulli, mu2: ProductBernoulli, anchors: Sequence,
                 gate_groups: Sequence[int] | None = None, budget: int = 1 << 20):
        if not np.array_equal(mu1.group_of, mu2.group_of):
            raise ValidationError("the two product measures must share their bit layout")
        self.mu1, self.mu2 = mu1, mu2
        self.anchors = tuple(np.asarray(a, dtype=bool) for a in anchors)
        for a in self.anchors:
            if a.shape != (mu1.n_bits,):
                raise ValidationError("anchor has the wrong number of bits")
        self.gates = tuple(int(g) for g in (gate_groups or ()))
        self.n_parts = 2 if gate_groups is not None else 1
        differ = np.flatnonzero(mu1.probs != mu2.probs)
        self.relevant = np.array(sorted(set(differ.tolist()) | set(self.gates)), dtype=np.int64)
        sizes = mu1.group_sizes
        self.sizes = sizes
        n_vec = math.prod(int(sizes[g]) + 1 for g in self.relevant)
        if n_vec > budget:
            raise BudgetExceededError(
                f"excess enumeration needs {n_vec} open-count vectors (budget {budget})")
        self._build_table()

    # -- count table --------------------------------------------------------

    def _build_table(self):
        rel = self.relevant
        n = self.sizes[rel]
        p1 = self.mu1.probs[rel]
        p2 = self.mu2.probs[rel]
        if rel.size:
            grids = np.meshgrid(*[np.arange(int(x) + 1) for x in n], indexing="ij")
            counts = np.stack([g.ravel() for g in grids], axis=1)
        else:
            counts = np.zeros((1, 0), dtype=np.int64)
        log_mult = np.sum(gammaln(n + 1) - gammaln(counts + 1) - gammaln(n - counts + 1), axis=1)
        log1 = log_count_mass(counts, n, p1)
        log2 = log_count_mass(counts, n, p2)
        if self.gates:
            gate_cols = [int(np.flatnonzero(rel == g)[0]) for g in self.gates]
            part = np.where(np.all(counts[:, gate_cols] == 0, axis=1), 0, 1)
        else:
            part = np.zeros(counts.shape[0], dtype=np.int64)
        t = _CountTable(counts, log_mult, log1, log2, part)
        w1 = np.exp(log_mult) * positive_gap(log1, log2)
        w2 = np.exp(log_mult) * positive_gap(log2, log1)
        exc1, exc2 = [], []
        for k in range(self.n_parts):
            sel = part == k
            e1 = math.fsum(w1[sel])
            e2 = math.fsum(w2[sel])
            for a in self.anchors:
                if self._part_bits(a) == k:
                    e1 -= self._rel_gap(a, first=True)
                    e2 -= self._rel_gap(a, first=False)
            exc1.append(max(e1, 0.0))
            exc2.append(max(e2, 0.0))
            w = np.where(sel, w2, 0.0)
            t.cdf2.append(np.cumsum(w))
        self.table = t
        self.excess1 = tuple(exc1)
        self.excess2 = tuple(exc2)

    def _rel_counts(self, bits):
        return self.mu1.counts(bits)[self.relevant]

    def _irrelevant_log_mass(self, bits):
        mask = np.ones(self.mu1.probs.size, dtype=bool)
        mask[self.relevant] = False
        c = self.mu1.counts(bits)
        return float(log_count_mass(c[mask], self.sizes[mask], self.mu1.probs[mask]))

    def _rel_gap(self, bits, first: bool) -> float:
        k = self._rel_counts(bits)
        n = self.sizes[self.relevant]
        l1 = log_count_mass(k, n, self.mu1.probs[self.relevant])
        l2 = log_count_mass(k, n, self.mu2.probs[self.relevant])
        gap = positive_gap(l1, l2) if first else positive_gap(l2, l1)
        return float(gap) * math.exp(self._irrelevant_log_mass(bits))

    def _part_bits(self, bits) -> int:
        if not self.gates:
            return 0
        c = self.mu1.counts(bits)
        return 0 if all(c[g] == 0 for g in self.gates) else 1

    # -- interface ----------------------------------------------------------

    def mass1(self, y):
        return self.mu1.mass(y)

    def mass2(self, y):
        return self.mu2.mass(y)

    def ratio(self, y):
        k = self._rel_counts(y)
        n = self.sizes[self.relevant]
        l1 = log_count_mass(k, n, self.mu1.probs[self.relevant])
        l2 = log_count_mass(k, n, self.mu2.probs[self.relevant])
        if l1 == -np.inf:
            return math.inf
        return math.exp(l2 - l1)

    def part_of(self, y):
        return self._part_bits(y)

    def same(self, a, b):
        return bool(np.array_equal(a, b))

    def sample1(self, rng):
        return self.mu1.sample(rng)

    def sample_excess2(self, part, rng, max_tries: int = 100_000):
        cdf = self.table.cdf2[part]
        if cdf.size == 0 or cdf[-1] <= 0:
            raise RuntimeError("sampling from an empty excess")
        group_of = self.mu1.group_of
        members = [np.flatnonzero(group_of == g) for g in self.relevant]
        for _ in range(max_tries):
            v = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            v = min(v, cdf.size - 1)
            bits = rng.random(self.mu1.n_bits) < self.mu1.probs[group_of]
            for col, idx in enumerate(members):
                bits[idx] = False
                k = int(self.table.counts[v, col])
                if k:
                    bits[rng.choice(idx, size=k, replace=False)] = True
            if self.anchor_index(bits) < 0:
                return bits
        raise RuntimeError("anchor rejection did not terminate")

    def enumerate_support(self, max_bits: int = 16):
        """All configurations (tiny layouts only), for exact cross-checks."""
        if self.mu1.n_bits > max_bits:
            raise BudgetExceededError(f"{self.mu1.n_bits} bits exceed {max_bits}")
        return [np.array(b, dtype=bool) for b in product((False, True), repeat=self.mu1.n_bits)]
