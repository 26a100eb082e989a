import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_block
from ladderperc.graph import (HORIZONTAL, VERTICAL, BaseGraph, GraphError, build_block_geometry,
                              build_ladder, classify_edges, cycle_graph, grid_graph,
                              integer_segment, load_base_graph, path_graph, parse_edge_list,
                              region_edges_and_vertices)


@st.composite
def connected_graphs(draw, max_vertices=6):
    """Random spanning tree plus a few extra edges."""
    n = draw(st.integers(1, max_vertices))
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}
    if n > 2:
        extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                              max_size=4))
        edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return BaseGraph(n, tuple(sorted(edges)))


# -- base graphs --------------------------------------------------------------


def test_smallest_path():
    g = load_base_graph("0 1\n")
    assert g.n_vertices == 2 and len(g.edges) == 1


def test_triangle():
    g = cycle_graph(3)
    assert g.n_vertices == 3 and len(g.edges) == 3


@pytest.mark.parametrize("text, fragment", [
    ("0 1\n2 3\n", "disconnected"),
    ("0 0\n", "self-loop"),
    ("0 1\n1 0\n", "duplicate"),
    ("0 1 2\n", "expected"),
])
def test_invalid_edge_lists(text, fragment):
    with pytest.raises(GraphError, match=fragment):
        load_base_graph(text)


def test_structured_source_and_dangling_endpoint():
    g = load_base_graph("vertices: [a, b, c]\nedges: [[a, b], [b, c]]\n")
    assert g.n_vertices == 3 and g.vertex("c") == 2
    with pytest.raises(GraphError, match="dangling"):
        load_base_graph("vertices: [a, b]\nedges: [[a, z]]\n")


def test_vertex_declarations_and_labels():
    g = parse_edge_list("# a comment\n# vertex x\ny x\nz y\n")
    assert g.labels == ("x", "y", "z")
    assert g.edges == ((0, 1), (1, 2))


def test_integer_segment_labels():
    g = integer_segment(-2, 2)
    assert g.vertex(-2) == 0 and g.label(4) == "2"
    assert g.ball(g.vertex(0), 1) == (2, 1, 3)  # by distance, then id


def test_ball_ties_by_id():
    g = grid_graph(3, 3)
    assert g.ball(4, 1) == (4, 1, 3, 5, 7)


# -- ladder windows -----------------------------------------------------------


def test_single_vertex_unoriented():
    w = build_ladder(BaseGraph(1, ()), False, 0, 3)
    assert w.n_vertices == 4 and w.n_edges == 3
    assert np.all(w.kind == VERTICAL)


def test_single_edge_oriented():
    g = parse_edge_list("a b\n")
    w = build_ladder(g, True, 0, 1)
    assert sorted(w.edges()) == [((0, 0), (1, 1)), ((1, 0), (0, 1))]


def test_empty_level_range():
    with pytest.raises(GraphError):
        build_ladder(path_graph(2), False, 3, 3)


def test_oriented_segment_splits_by_parity():
    g = integer_segment(-3, 3)
    w = build_ladder(g, True, 0, 6)
    h = nx.Graph()
    h.add_nodes_from(range(w.n_vertices))
    h.add_edges_from(zip(w.tail.tolist(), w.head.tolist()))
    comps = list(nx.connected_components(h))
    assert len(comps) == 2
    for comp in comps:
        parities = {(w.vertex_of(x)[0] + w.vertex_of(x)[1]) % 2 for x in comp}
        assert len(parities) == 1


@given(connected_graphs(), st.booleans(), st.integers(-3, 3), st.integers(1, 4))
def test_edge_index_bijection_and_counts(g, oriented, n_min, height):
    w = build_ladder(g, oriented, n_min, n_min + height)
    keys = w.edges()
    assert len(set(keys)) == w.n_edges
    assert all(w.edge_index[k] == i for i, k in enumerate(keys))
    if oriented:
        assert w.n_edges == 2 * len(g.edges) * height
        assert all(a[1] + 1 == b[1] and a[0] != b[0] for a, b in keys)
    else:
        assert w.n_edges == len(g.edges) * (height + 1) + g.n_vertices * height
    order = list(zip(w.level.tolist(), w.kind.tolist(), w.base_id.tolist()))
    assert order == sorted(order)


@given(connected_graphs(), st.booleans())
def test_classes_partition(g, oriented):
    w = build_ladder(g, oriented, 0, 3)
    edges = list(g.edges[:2])
    verts = [] if oriented else [0]
    c = classify_edges(w, edges, verts)
    assert c.sizes().sum() == w.n_edges
    for i, (a, b) in enumerate(edges, 1):
        for k in c.members(i):
            (u, _), (v, _) = w.edge(k)
            assert {u, v} == {a, b}
            assert oriented or w.kind[k] == HORIZONTAL
    if not oriented:
        line = c.members(len(edges) + 1)
        assert line.size == 3 and all(w.edge(k)[0][0] == 0 for k in line)


def test_class_assignment_example():
    g = integer_segment(-3, 3)
    w = build_ladder(g, False, 0, 4)
    c = classify_edges(w, [(g.vertex(-1), g.vertex(0))], [g.vertex(1)])
    assert c.sizes()[1] == 5 and c.sizes()[2] == 4
    wo = build_ladder(g, True, 0, 4)
    co = classify_edges(wo, [(g.vertex(-1), g.vertex(0))])
    keys = {wo.edge(k) for k in co.members(1)}
    a, b = g.vertex(-1), g.vertex(0)
    for n in range(4):
        assert ((a, n), (b, n + 1)) in keys and ((b, n), (a, n + 1)) in keys


def test_class_errors():
    g = path_graph(3)
    with pytest.raises(GraphError, match="vertical"):
        classify_edges(build_ladder(g, True, 0, 2), vertices=[0])
    with pytest.raises(GraphError, match="not a base edge"):
        classify_edges(build_ladder(g, False, 0, 2), [(0, 2)])


# -- blocks ------------------------------------------------------------------


def test_block_heights_and_boundaries(ball_block, four_vertex_block):
    b = ball_block
    assert b.height == 16 and len(b.region) == 7
    assert len(b.boundary(0)) == 2 * 17 + 2 * 7
    o = four_vertex_block
    assert o.height == 8
    assert len(o.lower_boundary(0)) == 2 * 9 + 4 == len(o.upper_boundary(0))


def test_boundary_edges_touch_distance_r_plus_one(ball_block):
    b = ball_block
    base = b.window.base
    dist = base.distances_from([b.center])
    _, t, h, verts = b.local_graph
    for k in range(b.n_local_edges):
        touches = dist[verts[t[k]][0]] == 4 or dist[verts[h[k]][0]] == 4
        assert touches == (b.local_class[k] == 0)


@pytest.mark.parametrize("oriented", [False, True])
def test_partition_and_translation(oriented):
    b = make_block(-4, 4, oriented, region=(0, 1), blocks=3)
    w = b.window
    seen = np.zeros(w.n_edges, int)
    seen[b.exterior_edges] += 1
    for idx in b.block_edges.values():
        seen[idx] += 1
    assert np.all(seen == 1)
    ref = b.block_edges[0]
    for n, idx in b.block_edges.items():
        for k0, k in zip(ref, idx):
            (a, la), (c, lc) = w.edge(k0)
            assert w.edge(k) == ((a, la + n * b.height), (c, lc + n * b.height))
    classed = np.flatnonzero(b.classes.class_of > 0)
    inside = np.concatenate(list(b.block_edges.values()))
    assert set(classed) - set(inside) <= set(b.exterior_edges)
    assert set(inside) - set(classed)


def test_block_errors():
    g = integer_segment(-2, 2)
    w = build_ladder(g, False, 0, 4)
    e, v = region_edges_and_vertices(g, [g.vertex(0)])
    with pytest.raises(GraphError, match="exactly"):
        build_block_geometry(w, classify_edges(w, e, []), center=g.vertex(0), radius=0)
    whole = list(g.vertices)
    e, v = region_edges_and_vertices(g, whole)
    with pytest.raises(GraphError):
        build_block_geometry(w, classify_edges(w, e, v), region=whole)
