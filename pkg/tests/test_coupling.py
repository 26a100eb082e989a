import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from ladderperc.coupling.lemmas import (PARTITIONED_CLAUSES, SINGLE_CLAUSES, IntervalCoupler,
                                        SequentialCoupler, case_codes, case_tag,
                                        couple_partitioned, couple_single,
                                        feasibility_partitioned,
                                        feasibility_single, joint_audit, make_coupler,
                                        partitioned_report, single_report)
from ladderperc.coupling.measures import (FiniteMeasure, FinitePair, ProductBernoulli,
                                          ProductPair, log_count_mass, positive_gap)
from ladderperc.errors import BudgetExceededError, InfeasibleCouplingError, ValidationError

M = FiniteMeasure


@st.composite
def simplex(draw, n, min_weight=0.0):
    w = np.array(draw(st.lists(st.floats(min_weight, 1.0), min_size=n, max_size=n)))
    assume(w.sum() > 1e-3)
    w = w / w.sum()
    w[-1] = 1.0 - math.fsum(w[:-1])
    assume(w[-1] >= 0)
    return w


@st.composite
def single_pairs(draw, max_size=8):
    """Feasible single-anchor pairs: both measures put at least half their mass on the anchor."""
    n = draw(st.integers(2, max_size))
    a = draw(st.integers(0, n - 1))
    out = []
    for _ in range(2):
        top = draw(st.floats(0.5, 0.95))
        rest = draw(simplex(n - 1))
        m = np.insert(rest * (1 - top), a, top)
        m[-1] = 1.0 - math.fsum(m[:-1])
        out.append(M(m))
    return FinitePair(out[0], out[1], [a])


@st.composite
def partitioned_pairs(draw, max_size=8):
    n = draw(st.integers(3, max_size))
    split = draw(st.integers(1, n - 1))
    first = np.arange(n) < split
    x_hat = draw(st.integers(0, split - 1))
    x_hh = draw(st.integers(split, n - 1))
    mu1 = M(draw(simplex(n, 0.01)))
    w2 = draw(simplex(n, 0.01)) * 0.3
    w2[x_hat] += 0.35
    w2[x_hh] += 0.35
    w2[-1] = 1.0 - math.fsum(w2[:-1])
    pair = FinitePair(mu1, M(w2), [x_hat, x_hh], first)
    assume(partitioned_report(pair)["feasible"])
    return pair


# -- measures ------------------------------------------------------------------


def test_finite_measure_rejects():
    for bad in ([], [0.5, 0.6], [-0.1, 1.1], [np.nan, 1.0]):
        with pytest.raises(ValidationError):
            M(bad)


def test_finite_measure_sampling_frequencies():
    mu = M([0.1, 0.2, 0.7])
    x = mu.sample(4, 200_000)
    counts = np.bincount(x, minlength=3)
    assert stats.chisquare(counts, 200_000 * mu.masses).pvalue > 0.001


def test_product_mass_matches_brute_force():
    mu = ProductBernoulli([0, 0, 1], [0.3, 0.8])
    bits = np.array([1, 0, 1], bool)
    assert mu.mass(bits) == pytest.approx(0.3 * 0.7 * 0.8)
    total = sum(mu.mass(np.array(b, bool)) for b in np.ndindex(2, 2, 2))
    assert total == pytest.approx(1.0)


def test_log_count_mass_endpoints():
    assert log_count_mass([0], [3], [0.0]) == 0.0
    assert log_count_mass([3], [3], [1.0]) == 0.0
    assert log_count_mass([1], [3], [0.0]) == -np.inf


@given(st.floats(-50, 0), st.floats(-50, 0))
def test_positive_gap(la, lb):
    want = max(math.exp(la) - math.exp(lb), 0.0)
    assert positive_gap(la, lb) == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_product_pair_excess_matches_enumeration():
    mu1 = ProductBernoulli([0, 0, 1, 2, 2], [0.3, 0.6, 0.5])
    mu2 = ProductBernoulli([0, 0, 1, 2, 2], [0.35, 0.6, 0.45])
    anchor = np.zeros(5, bool)
    pp = ProductPair(mu1, mu2, [anchor], gate_groups=[1])
    support = pp.enumerate_support()
    m1 = np.array([mu1.mass(b) for b in support])
    m2 = np.array([mu2.mass(b) for b in support])
    idx = [i for i, b in enumerate(support) if not b.any()][0]
    gate = np.array([b[2] for b in support])
    fp = FinitePair(M(m1 / m1.sum()), M(m2 / m2.sum()), [idx], ~gate)
    for k in range(2):
        assert pp.excess1[k] == pytest.approx(fp.excess1[k], abs=1e-12)
        assert pp.excess2[k] == pytest.approx(fp.excess2[k], abs=1e-12)


def test_product_pair_excess_sampler_law():
    mu1 = ProductBernoulli([0, 0, 0], [0.3])
    mu2 = ProductBernoulli([0, 0, 0], [0.5])
    pp = ProductPair(mu1, mu2, [np.zeros(3, bool)])
    rng = np.random.default_rng(0)
    draws = [pp.sample_excess2(0, rng) for _ in range(20_000)]
    support = pp.enumerate_support()
    gap = np.array([max(mu2.mass(b) - mu1.mass(b), 0.0) if b.any() else 0.0 for b in support])
    keys = [int(sum(int(v) << i for i, v in enumerate(d))) for d in draws]
    codes = [int(sum(int(v) << i for i, v in enumerate(b))) for b in support]
    counts = np.array([keys.count(c) for c in codes])
    nz = gap > 0
    assert counts[~nz].sum() == 0
    assert stats.chisquare(counts[nz], len(draws) * gap[nz] / gap.sum()).pvalue > 0.001


def test_product_pair_budget():
    mu = ProductBernoulli(np.arange(30) % 6, np.linspace(0.1, 0.6, 6))
    mu2 = ProductBernoulli(np.arange(30) % 6, np.linspace(0.15, 0.65, 6))
    with pytest.raises(BudgetExceededError):
        ProductPair(mu, mu2, [np.zeros(30, bool)], budget=100)


# -- feasibility ---------------------------------------------------------------


def test_feasibility_single_examples():
    mu = M([0.3, 0.7])
    assert feasibility_single(mu, mu, 1)
    assert feasibility_single(M([0.5, 0.5]), M([0.4, 0.6]), 1)
    assert not feasibility_single(M([0.9, 0.05, 0.05]), M([0.05, 0.9, 0.05]), 2)


def test_feasibility_single_requires_anchor_mass():
    with pytest.raises(ValidationError):
        feasibility_single(M([1.0, 0.0]), M([0.5, 0.5]), 1)


def test_feasibility_partitioned_examples():
    mu1, mu2 = M([0.2, 0.4, 0.4]), M([0.1, 0.45, 0.45])
    part = [True, True, False]
    assert feasibility_partitioned(mu1, mu1, part, 1, 2)
    rep = partitioned_report(FinitePair(mu1, mu2, [1, 2], part))
    assert rep["excess1_Shathat"] == 0.0
    assert rep["first_inequality"] and rep["second_inequality"]
    # second anchor has no mass under mu2 while the second part carries first-measure excess
    mu1b, mu2b = M([0.2, 0.3, 0.2, 0.3]), M([0.3, 0.6, 0.1, 0.0])
    rep = partitioned_report(FinitePair(mu1b, mu2b, [1, 3], [True, True, False, False]))
    assert rep["excess1_Shathat"] > 0 and not rep["first_inequality"] and not rep["feasible"]


def test_feasibility_partitioned_strict_at_equality():
    # first measure excess on the second part equals mu2 of the second anchor exactly
    mu1, mu2 = M([0.25, 0.25, 0.5, 0.0]), M([0.25, 0.25, 0.25, 0.25])
    part = [True, True, False, False]
    with pytest.raises(ValidationError):
        feasibility_partitioned(mu1, mu2, part, 1, 3)  # x_hathat has no first-measure mass
    mu1 = M([0.25, 0.25, 0.25, 0.25])
    mu2 = M([0.25, 0.5, 0.0, 0.25])
    rep = partitioned_report(FinitePair(mu1, mu2, [1, 3], part))
    assert rep["excess1_Shathat"] == pytest.approx(0.25)
    assert not rep["first_inequality"]


@pytest.mark.parametrize("part, xh, xhh", [([True] * 3, 0, 1), ([False] * 3, 0, 1),
                                            ([True, False, False], 1, 2)])
def test_partition_validation(part, xh, xhh):
    mu = M([0.2, 0.4, 0.4])
    with pytest.raises(ValidationError):
        feasibility_partitioned(mu, mu, part, xh, xhh)


# -- single anchor couplings -------------------------------------------------


@pytest.mark.parametrize("backend", ["interval", "sequential"])
def test_two_state_joint(backend):
    pair = FinitePair(M([0.5, 0.5]), M([0.4, 0.6]), [1])
    joint = make_coupler(pair, backend).exact_joint()
    assert np.allclose(joint, [[0.4, 0.1], [0.0, 0.5]], atol=1e-15)
    audit = joint_audit(pair, joint)
    assert audit["violating_atoms"] == []
    assert audit["clause_mass"]["X=Y"] == pytest.approx(0.9)


@pytest.mark.parametrize("backend", ["interval", "sequential"])
def test_identical_measures_couple_on_diagonal(backend):
    mu = M([0.2, 0.5, 0.3])
    for seed in range(50):
        out = couple_single(mu, mu, 2, seed, backend)
        assert out.X == out.Y and out.case_tag == SINGLE_CLAUSES[0]


def test_infeasible_single_raises_with_report():
    with pytest.raises(InfeasibleCouplingError) as err:
        couple_single(M([0.9, 0.05, 0.05]), M([0.05, 0.9, 0.05]), 2, seed=0)
    assert err.value.exit_code == 3 and err.value.report["feasible"] is False


def test_unknown_backend():
    with pytest.raises(ValidationError):
        make_coupler(FinitePair(M([0.5, 0.5]), M([0.5, 0.5]), [0]), "magic")


@settings(max_examples=60)
@given(single_pairs())
def test_interval_joint_exact(pair):
    joint = IntervalCoupler(pair, single_report(pair)).exact_joint()
    audit = joint_audit(pair, joint)
    assert audit["tv_first"] <= 1e-12 and audit["tv_second"] <= 1e-12
    assert audit["violating_atoms"] == []


@settings(max_examples=60)
@given(single_pairs())
def test_sequential_joint_exact_and_matches_interval_clauses(pair):
    rep = single_report(pair)
    seq = SequentialCoupler(pair, rep).exact_joint()
    audit = joint_audit(pair, seq, atol=1e-15)
    assert audit["tv_first"] <= 1e-12 and audit["tv_second"] <= 1e-12
    assert audit["violating_atoms"] == []
    itv = IntervalCoupler(pair, rep).exact_joint()
    # both keep the same maximal off-anchor diagonal
    assert audit["p_x_equals_y"] == pytest.approx(np.trace(itv), abs=1e-12)


@settings(max_examples=20)
@given(single_pairs(max_size=5), st.integers(0, 2**31))
def test_per_sample_clause_both_backends(pair, seed):
    for backend in ("interval", "sequential"):
        c = make_coupler(pair, backend)
        for i in range(30):
            out = c.sample(np.random.default_rng([seed, i]))
            assert case_tag(pair, out.X, out.Y) == out.case_tag


@pytest.mark.parametrize("backend", ["interval", "sequential"])
def test_sampled_marginals(backend):
    pair = FinitePair(M([0.1, 0.3, 0.2, 0.4]), M([0.15, 0.25, 0.15, 0.45]), [3])
    n = 100_000
    x, y = make_coupler(pair, backend).sample_many_finite(n, seed=11)
    for draws, mu in ((x, pair.mu1), (y, pair.mu2)):
        freq = np.bincount(draws, minlength=4) / n
        se = np.sqrt(mu.masses * (1 - mu.masses) / n)
        assert np.all(np.abs(freq - mu.masses) <= 4 * se)
    assert all(case_tag(pair, a, b) is not None for a, b in zip(x[:2000], y[:2000]))


# -- partitioned couplings ---------------------------------------------------


def _three_state():
    return FinitePair(M([0.2, 0.4, 0.4]), M([0.1, 0.45, 0.45]), [1, 2], [True, True, False])


@pytest.mark.parametrize("backend", ["interval", "sequential"])
def test_three_state_partitioned_exact(backend):
    pair = _three_state()
    audit = joint_audit(pair, make_coupler(pair, backend).exact_joint(), atol=1e-15)
    assert audit["tv_first"] <= 1e-12 and audit["tv_second"] <= 1e-12
    assert audit["violating_atoms"] == []
    assert audit["second_anchor_conditional"] == 1.0
    assert audit["second_anchor_violations"] == []


@settings(max_examples=60)
@given(partitioned_pairs(), st.sampled_from(["interval", "sequential"]))
def test_partitioned_joint_exact(pair, backend):
    audit = joint_audit(pair, make_coupler(pair, backend).exact_joint(), atol=1e-15)
    assert audit["tv_first"] <= 1e-12 and audit["tv_second"] <= 1e-12
    assert audit["violating_atoms"] == []
    assert audit["second_anchor_violations"] == []
    assert sum(audit["clause_mass"].values()) == pytest.approx(1.0, abs=1e-12)


def test_partitioned_conditional_hard_on_samples():
    mu1 = M([0.1, 0.35, 0.15, 0.4])
    mu2 = M([0.05, 0.45, 0.1, 0.4])
    part = [True, True, False, False]
    pair = FinitePair(mu1, mu2, [1, 3], part)
    assert partitioned_report(pair)["feasible"]
    for backend in ("interval", "sequential"):
        x, y = make_coupler(pair, backend).sample_many_finite(100_000, seed=5)
        assert np.all(np.isin(y[x == 3], [1, 3]))
        assert np.all(np.array([case_tag(pair, a, b) for a, b in zip(x, y)]) != None)  # noqa: E711


def test_couple_partitioned_entry_point():
    mu1, mu2 = M([0.2, 0.4, 0.4]), M([0.1, 0.45, 0.45])
    tags = {couple_partitioned(mu1, mu2, [True, True, False], 1, 2, s).case_tag for s in range(300)}
    assert tags <= set(PARTITIONED_CLAUSES)
    assert PARTITIONED_CLAUSES[0] in tags


@settings(max_examples=30)
@given(partitioned_pairs(), st.integers(0, 2**31))
def test_vectorised_tags_match_scalar(pair, seed):
    r = np.random.default_rng(seed)
    xs = r.integers(pair.size, size=50)
    ys = r.integers(pair.size, size=50)
    clauses = (None,) + PARTITIONED_CLAUSES  # code -1 maps to None
    codes = case_codes(pair, xs, ys)
    assert [clauses[c + 1] for c in codes] == [case_tag(pair, x, y) for x, y in zip(xs, ys)]
