import numpy as np
import pytest

from conftest import make_block
from helpers import bfs_cluster, window_reach
from ladderperc.coupling.blocks import (BlockCoupler, BlockLayout, WindowCoupler, build_xbar,
                                        build_xhat_pair, couple_block_oriented,
                                        couple_block_unoriented, couple_exterior, couple_window)
from ladderperc.errors import BudgetExceededError, InfeasibleCouplingError, ValidationError
from ladderperc.graph import (build_block_geometry, build_ladder, classify_edges,
                              region_edges_and_vertices)
from ladderperc.percolation import ReachQuery, boundary_matrix

# feasible parameter sets for the small fixtures (see the bundled experiment files)
UNORIENTED = dict(q=(0.5,), q_prime=(0.5 + 1e-4,), p=0.3, epsilon=0.6)
ORIENTED = dict(q=(0.875,) * 3, q_prime=(0.875 + 1e-11,) * 3, p=0.05, epsilon=0.9)


def _random_subsets(vertices, rng, n):
    vs = list(vertices)
    for _ in range(n):
        keep = rng.random(len(vs)) < 0.3
        if not keep.any():
            keep[rng.integers(len(vs))] = True
        yield frozenset(v for v, k in zip(vs, keep) if k)


# -- deterministic anchors ---------------------------------------------------


def test_xbar_identities_ball(ball_block, rng):
    xbar = build_xbar(ball_block)
    assert xbar.checks["isolates_every_subset"] and xbar.checks["connects_every_subset"]
    bnd = ball_block.boundary(0)
    assert len(bnd) == 48
    closed, merged = xbar.local(False), xbar.local(True)
    for a in _random_subsets(bnd, rng, 200):
        assert bfs_cluster(ball_block, closed, a) == a
        assert bfs_cluster(ball_block, merged, a) == frozenset(bnd)


def test_xbar_ordering_and_paths(ball_block):
    xbar = build_xbar(ball_block)
    g = ball_block.window.base
    outside = [v for v in g.vertices if v not in set(ball_block.region)]
    d = g.distances_from(outside)
    ds = [int(d[w]) for w in xbar.w_order]
    assert ds == sorted(ds) and sorted(xbar.w_order) == sorted(ball_block.region)
    rim = set(ball_block.rim)
    for w, path in zip(xbar.w_order, xbar.paths):
        assert path[0] == w and path[-1] in rim
        assert len(path) - 1 == min(int(g.distances_from([w])[r]) for r in rim)


def test_xbar_opens_no_boundary_edge(ball_block):
    xbar = build_xbar(ball_block)
    assert not xbar.local(False)[ball_block.local_class == 0].any()
    assert xbar.local(True)[ball_block.local_class == 0].all()


def test_xbar_orientation_errors(four_vertex_block, ball_block):
    with pytest.raises(ValidationError):
        build_xbar(four_vertex_block)
    with pytest.raises(ValidationError):
        build_xhat_pair(ball_block)


def test_xhat_pair_gate(four_vertex_block):
    pair = build_xhat_pair(four_vertex_block)
    lay = pair.layout
    assert pair.checks["containment"]
    gate = lay.gate_mask[lay.class_pos]
    cls_hat = lay.split(pair.x_hat)[0]
    assert not cls_hat[gate].any() and cls_hat[~gate].all()
    assert lay.split(pair.x_hathat)[0].all()
    small = boundary_matrix(four_vertex_block, lay.omega(pair.x_hathat))
    large = boundary_matrix(four_vertex_block, lay.omega_prime(pair.x_hat))
    assert not (small & ~large).any()


def test_layout_state_round_trip(four_vertex_block, rng):
    lay = BlockLayout(four_vertex_block)
    local = rng.random(four_vertex_block.n_local_edges) < 0.5
    layer2 = rng.random(lay.n_bnd) < 0.5
    s = lay.state_from_local(local, layer2)
    assert np.array_equal(lay.omega(s), local)
    merged = lay.omega_prime(s)
    assert np.array_equal(merged[lay.bnd_pos], local[lay.bnd_pos] | layer2)


# -- block couplings ---------------------------------------------------------


def test_unoriented_block_containment(two_vertex_block):
    bc = BlockCoupler(two_vertex_block, **UNORIENTED)
    cases = set()
    for i in range(400):
        s = bc.sample(np.random.default_rng([7, i]))
        assert s.containment, s.record(i)
        cases.add(s.outcome.case_tag)
    assert "X=Y" in cases


def test_interval_backend_needs_enumerable_block(two_vertex_block):
    # 4 class bits plus two boundary layers of 8 bits: 2^20 states, over the 2^16 cap
    with pytest.raises(BudgetExceededError):
        BlockCoupler(two_vertex_block, **UNORIENTED, backend="interval")


def test_oriented_block_containment(four_vertex_block):
    bc = BlockCoupler(four_vertex_block, **ORIENTED)
    assert bc.report["first_inequality"] and bc.report["second_inequality"]
    for i in range(200):
        s = bc.sample(np.random.default_rng([3, i]))
        assert s.containment, s.record(i)


def test_block_entry_points_check_orientation(two_vertex_block, four_vertex_block):
    s = couple_block_unoriented(two_vertex_block, seed=1, **UNORIENTED)
    assert s.containment
    s = couple_block_oriented(four_vertex_block, seed=1, **ORIENTED)
    assert s.containment
    with pytest.raises(ValidationError):
        couple_block_oriented(two_vertex_block, seed=1, **UNORIENTED)


def test_infeasible_block_raises(four_vertex_block):
    with pytest.raises(InfeasibleCouplingError) as err:
        BlockCoupler(four_vertex_block, q=(0.875,) * 3, q_prime=(0.875 + 1e-6,) * 3, p=0.05,
                     epsilon=0.9)
    assert err.value.exit_code == 3


def test_block_param_validation(two_vertex_block):
    with pytest.raises(ValueError):
        BlockCoupler(two_vertex_block, q=(0.5, 0.5), q_prime=(0.5, 0.5), p=0.3, epsilon=0.6)
    with pytest.raises(ValueError):
        BlockCoupler(two_vertex_block, q=(0.5,), q_prime=(0.5,), p=0.3, epsilon=0.8)


# -- exterior and window -----------------------------------------------------


def test_exterior_rates_and_domination():
    z, zp = couple_exterior(200_000, 0.3, 0.2, seed=4)
    assert not (z & ~zp).any()
    se = np.sqrt(0.25 / z.size)
    assert abs(z.mean() - 0.3) < 4 * se and abs(zp.mean() - 0.5) < 4 * se
    z0, zp0 = couple_exterior(10_000, 0.0, 0.4, seed=4)
    assert not z0.any() and zp0.any()
    with pytest.raises(ValidationError):
        couple_exterior(10, 0.5, 0.5, seed=0)


@pytest.fixture(scope="module")
def window_block():
    return make_block(0, 1, False, center=0, radius=0, blocks=4)


def test_window_reach_implication(window_block):
    w = window_block.window
    query = ReachQuery.crossing(w)
    targets = {w.vertex_of(i) for i in range(w.n_vertices) if w.vertex_of(i)[1] >= w.n_max}
    wc = WindowCoupler(window_block, **UNORIENTED)
    wc.check_query(query)
    for i in range(300):
        s = wc.sample(np.random.default_rng([5, i]), query)
        assert not s.reach[0] or s.reach[1]
        assert s.reach[0] == window_reach(w, s.omega.bits, query.sources, targets)
        assert s.record()["implication"]


def test_window_marginal_bulk_rate(window_block):
    wc = WindowCoupler(window_block, **UNORIENTED)
    bulk = wc.ext_bulk
    n = 400
    frac = np.mean([wc.sample(i).omega.bits[bulk].mean() for i in range(n)])
    assert abs(frac - 0.3) < 4 * np.sqrt(0.21 / (n * bulk.size))


def test_window_rejects_partial_blocks_and_interior_queries(window_block):
    b = make_block(0, 1, False, center=0, radius=0)
    w = build_ladder(b.window.base, False, 0, 6)
    e, v = region_edges_and_vertices(w.base, [0])
    partial = build_block_geometry(w, classify_edges(w, e, v), center=0, radius=0)
    with pytest.raises(ValidationError):
        WindowCoupler(partial, **UNORIENTED)
    wc = WindowCoupler(window_block, **UNORIENTED)
    with pytest.raises(ValidationError):
        wc.check_query(ReachQuery(frozenset({(0, 2)}), target_level=window_block.window.n_max))


def test_couple_window_single_block_agrees_with_block(two_vertex_block):
    s = couple_window(two_vertex_block, seed=9, query=ReachQuery.crossing(two_vertex_block.window),
                      **UNORIENTED)
    only = s.block_samples[0]
    idx = two_vertex_block.block_edges[0]
    assert np.array_equal(s.omega.bits[idx], only.omega)
    assert np.array_equal(s.omega_prime.bits[idx], only.omega_prime)


def test_oriented_window(four_vertex_block):
    query = ReachQuery.crossing(four_vertex_block.window)
    for i in range(50):
        s = couple_window(four_vertex_block, seed=[2, i], query=query, **ORIENTED)
        assert not s.reach[0] or s.reach[1]
