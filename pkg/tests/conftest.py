import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ladderperc.graph import (build_block_geometry, build_ladder, classify_edges,
                              integer_segment, path_graph, region_edges_and_vertices)

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_block(lo, hi, oriented, *, region=None, center=None, radius=None, blocks=1):
    """Window of ``blocks`` whole blocks around a region of the segment [lo, hi]."""
    g = integer_segment(lo, hi)
    if region is not None:
        reg = [g.vertex(x) for x in region]
    else:
        reg = list(g.ball(g.vertex(center), radius))
    edges, verts = region_edges_and_vertices(g, reg)
    if oriented:
        verts = ()
    h = 2 * len(edges) + 2 if oriented else 2 * len(verts) + 2
    w = build_ladder(g, oriented, 0, h * blocks)
    classes = classify_edges(w, edges, verts)
    if region is not None:
        return build_block_geometry(w, classes, region=reg)
    return build_block_geometry(w, classes, center=g.vertex(center), radius=radius)


@pytest.fixture(scope="session")
def ball_block():
    """Unoriented segment, U = B_3(0): seven vertices, block height 16."""
    return make_block(-5, 5, False, center=0, radius=3)


@pytest.fixture(scope="session")
def four_vertex_block():
    """Oriented segment, U = {-1, 0, 1, 2}: K = 3, block height 8."""
    return make_block(-5, 5, True, region=(-1, 0, 1, 2))


@pytest.fixture(scope="session")
def two_vertex_block():
    """Base graph {0, 1}, U = {0}: the smallest unoriented block."""
    g = path_graph(2)
    w = build_ladder(g, False, 0, 4)
    e, v = region_edges_and_vertices(g, [0])
    return build_block_geometry(w, classify_edges(w, e, v), center=0, radius=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "ACCEPTANCE", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
