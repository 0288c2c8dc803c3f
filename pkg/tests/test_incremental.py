import math

import numpy as np
import pytest

from gsmm.errors import MatchFailure
from gsmm.evaluation import rmf
from gsmm.incremental import (IncrementalConfig, _Scorer, distance_score, incremental_match,
                              initial_edge, orientation_score)

from conftest import net_from_xy, noiseless, trace_from_xy

CFG = IncrementalConfig()


def test_config_validation():
    with pytest.raises(ValueError):
        IncrementalConfig(a=0)
    with pytest.raises(ValueError):
        IncrementalConfig(lookahead_depth=0)


def test_distance_score():
    assert distance_score(0, CFG) == 10
    assert distance_score(58.82, CFG) == pytest.approx(0, abs=1e-3)
    vals = [distance_score(d, CFG) for d in np.linspace(0, 200, 300)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_orientation_score():
    assert orientation_score(0, CFG) == 10
    assert orientation_score(math.pi / 2, CFG) == 0
    assert orientation_score(3.0, CFG) == 0
    vals = [orientation_score(t, CFG) for t in np.linspace(0, math.pi / 2, 300)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert all(a > b for a, b in zip(vals[:200], vals[1:200]))


def test_straight_road():
    nodes = {i: (100 * i, 0) for i in range(4)}
    net = net_from_xy(nodes, [(i, i, i + 1) for i in range(3)] + [(10 + i, i + 1, i) for i in range(3)])
    tr = trace_from_xy([(x, 1) for x in range(5, 296, 10)])
    assert incremental_match(net, tr).edges == (0, 1, 2)


def fork():
    # approach from the west, then branch A (north-east) or B (south-east)
    nodes = {0: (0, 0), 1: (100, 0), 2: (200, 20), 3: (200, -20)}
    net = net_from_xy(nodes, [(0, 0, 1), (1, 1, 2), (2, 1, 3)])
    # the first point past the fork leans towards A, the rest follow B
    xy = [(60, 0), (80, 0), (100, 0), (110, 1.5), (130, -6), (150, -10), (170, -14)]
    return net, trace_from_xy(xy)


def test_fork_greedy_goes_wrong():
    net, tr = fork()
    assert incremental_match(net, tr, IncrementalConfig(lookahead_depth=1)).edges == (0, 1)


def test_fork_lookahead_corrects():
    net, tr = fork()
    assert incremental_match(net, tr).edges == (0, 2)


def exhaustive(scorer, eid, i, depth):
    """Best total over every continuation sequence of ``depth`` steps."""
    best = -math.inf
    stack = [(eid, i, scorer.score(eid, i))]
    while stack:
        e, k, s = stack.pop()
        if k - i + 1 == depth or k + 1 >= len(scorer.pts):
            best = max(best, s)
            continue
        for x in scorer.options(e):
            stack.append((x, k + 1, s + scorer.score(x, k + 1)))
    return best


def test_lookahead_equals_enumeration():
    net, tr = fork()
    pts = tr.local_points(net.origin)
    for depth in (1, 2, 3, 4):
        sc = _Scorer(net, pts, IncrementalConfig(lookahead_depth=depth))
        for i in range(1, len(pts)):
            for e in net.edges:
                assert sc.lookahead(e, i, depth) == pytest.approx(exhaustive(sc, e, i, depth))


def test_depth_one_is_plain_score():
    net, tr = fork()
    sc = _Scorer(net, tr.local_points(net.origin), CFG)
    assert all(sc.lookahead(e, 3, 1) == sc.score(e, 3) for e in net.edges)


def test_too_many_unmatched_measurements():
    nodes = {0: (0, 0), 1: (1000, 0)}
    net = net_from_xy(nodes, [(0, 0, 1)])
    xy = [(10, 0), (20, 0)] + [(30 + 10 * k, 500) for k in range(11)] + [(200, 0)]
    with pytest.raises(MatchFailure) as exc:
        incremental_match(net, trace_from_xy(xy))
    assert exc.value.index == 12


def test_ten_unmatched_measurements_are_tolerated():
    net = net_from_xy({0: (0, 0), 1: (1000, 0)}, [(0, 0, 1)])
    xy = [(10, 0), (20, 0)] + [(30 + 10 * k, 500) for k in range(10)] + [(200, 0)]
    assert incremental_match(net, trace_from_xy(xy)).edges == (0,)


def test_no_start_edge():
    net = net_from_xy({0: (0, 0), 1: (100, 0)}, [(0, 0, 1)])
    with pytest.raises(MatchFailure) as exc:
        incremental_match(net, trace_from_xy([(0, 500), (100, 500)]))
    assert exc.value.index == 0


def test_initial_edge_prefers_trace_direction():
    net = net_from_xy({0: (0, 0), 1: (100, 0)}, [(0, 0, 1), (1, 1, 0)])
    east = trace_from_xy([(10, 0), (20, 0)])
    west = trace_from_xy([(90, 0), (80, 0)])
    assert initial_edge(net, east.local_points(net.origin), CFG) == 0
    assert initial_edge(net, west.local_points(net.origin), CFG) == 1


def test_noiseless_grid_routes_connected(grid10, grid_routes):
    for k, route in enumerate(grid_routes[:10]):
        tr, gt = noiseless(grid10, route, period=5.0, seed=k)
        m = incremental_match(grid10, tr)
        assert m.is_connected(grid10)
        assert rmf(gt, m.edges, grid10).rmf == 0
