import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_block
from helpers import brute_force_probability, window_reach
from ladderperc.coupling.measures import FiniteMeasure, FinitePair
from ladderperc.errors import BudgetExceededError, InfeasibleCouplingError
from ladderperc.graph import BaseGraph, build_ladder, classify_edges, integer_segment
from ladderperc.oracle import (EnumerationBudget, exact_coupling_audit, exact_reach_probability,
                               exhaustive_containment_check)
from ladderperc.percolation import ParamSet, ReachQuery


def test_single_edge_and_series():
    g = BaseGraph(1, ())
    for levels, power in ((1, 1), (2, 2), (3, 3)):
        w = build_ladder(g, False, 0, levels)
        r = exact_reach_probability(w, classify_edges(w), ParamSet(0.3), ReachQuery.crossing(w))
        assert r["probability"] == pytest.approx(0.3 ** power, rel=1e-14)
        assert r["total_mass"] == pytest.approx(1.0, abs=1e-12)


def test_extreme_parameters():
    w = build_ladder(integer_segment(0, 2), False, 0, 2)
    c = classify_edges(w)
    q = ReachQuery.crossing(w)
    assert exact_reach_probability(w, c, ParamSet(0.0), q)["probability"] == 0.0
    assert exact_reach_probability(w, c, ParamSet(1.0), q)["probability"] == 1.0


@settings(max_examples=25)
@given(st.booleans(), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_matches_brute_force(oriented, p, q):
    g = integer_segment(0, 2)
    w = build_ladder(g, oriented, 0, 2)
    c = classify_edges(w, [(0, 1)])
    params = ParamSet(p, (q,))
    query = ReachQuery.crossing(w)
    targets = {w.vertex_of(i) for i in range(w.n_vertices) if w.vertex_of(i)[1] >= w.n_max}
    probs = params.edge_probabilities(c)
    want = brute_force_probability(w, probs,
                                   lambda bits: window_reach(w, bits, query.sources, targets))
    got = exact_reach_probability(w, c, params, query)["probability"]
    assert got == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_edge_budget():
    w = build_ladder(integer_segment(0, 4), False, 0, 4)
    with pytest.raises(BudgetExceededError) as err:
        exact_reach_probability(w, classify_edges(w), ParamSet(0.5), ReachQuery.crossing(w))
    assert err.value.exit_code == 5
    with pytest.raises(ValueError):
        EnumerationBudget(max_edges=0)


# -- coupling audits ---------------------------------------------------------


def test_audit_identical_measures():
    mu = FiniteMeasure([0.25, 0.25, 0.5])
    a = exact_coupling_audit(FinitePair(mu, mu, [0]))
    assert a["tv_first"] == 0.0 and a["tv_second"] == 0.0
    assert a["p_x_equals_y"] == pytest.approx(1.0)


def test_audit_two_state_and_three_state():
    a = exact_coupling_audit(FinitePair(FiniteMeasure([0.5, 0.5]), FiniteMeasure([0.4, 0.6]),
                                        [1]))
    assert a["clause_mass"] == pytest.approx({"X=Y": 0.9, "X=xbar": 0.0, "Y=xbar": 0.1})
    b = exact_coupling_audit(FinitePair(FiniteMeasure([0.2, 0.4, 0.4]),
                                        FiniteMeasure([0.1, 0.45, 0.45]), [1, 2],
                                        [True, True, False]), backend="sequential")
    assert b["second_anchor_conditional"] == 1.0 and b["violating_atoms"] == []


def test_audit_budget_and_infeasible():
    mu = FiniteMeasure(np.full(8, 0.125))
    with pytest.raises(BudgetExceededError):
        exact_coupling_audit(FinitePair(mu, mu, [0]), budget=EnumerationBudget(max_support=4))
    with pytest.raises(InfeasibleCouplingError):
        exact_coupling_audit(FinitePair(FiniteMeasure([0.9, 0.05, 0.05]),
                                        FiniteMeasure([0.05, 0.9, 0.05]), [2]))


# -- containment ---------------------------------------------------------------


def test_cases_mode_ball_and_four_vertex(ball_block, four_vertex_block):
    r5 = exhaustive_containment_check(ball_block)
    assert r5["ok"] and set(r5["results"]) == {"X=xbar", "Y=xbar"}
    r7 = exhaustive_containment_check(four_vertex_block)
    assert r7["ok"] and len(r7["results"]) == 4


def test_pairs_mode(two_vertex_block, rng):
    n = two_vertex_block.n_local_edges
    pairs = [(rng.random(n) < 0.5, np.ones(n, bool)) for _ in range(10)]
    assert exhaustive_containment_check(two_vertex_block, pairs, mode="pairs")["ok"]
    bad = exhaustive_containment_check(two_vertex_block, [(np.ones(n, bool), np.zeros(n, bool))],
                                       mode="pairs")
    assert not bad["ok"] and bad["failures"][0]["case"] == "pair 0"


def test_exhaustive_mode_small_block():
    block = make_block(-1, 1, False, center=0, radius=0)
    r = exhaustive_containment_check(block, mode="exhaustive")
    assert r["ok"] and r["configurations_per_case"] == 1 << block.n_local_edges
    with pytest.raises(BudgetExceededError):
        exhaustive_containment_check(block, mode="exhaustive",
                                     budget=EnumerationBudget(max_edges=4))
