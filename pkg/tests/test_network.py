import json
import math

import numpy as np
import pytest

from gsmm.errors import NetworkError
from gsmm.geo import PlanePoint, project
from gsmm.network import (load_network, network_from_dict, path_edges,
                          save_network, shortest_paths)

from conftest import net_from_xy


def two_node_doc():
    return {"nodes": [{"id": 1, "lat": 50.0, "lon": 14.0}, {"id": 2, "lat": 50.001, "lon": 14.0}],
            "edges": [{"id": 7, "from": 1, "to": 2}]}


def test_load_two_node_fixture(tmp_path):
    p = tmp_path / "n.json"
    p.write_text(json.dumps(two_node_doc()))
    net = load_network(p)
    assert len(net.nodes) == 2 and len(net.edges) == 1
    assert net.edges[7].length == pytest.approx(111.195, rel=1e-3)


def test_missing_node_names_the_edge():
    doc = two_node_doc()
    doc["edges"][0]["to"] = 99
    with pytest.raises(NetworkError, match="edge 7"):
        network_from_dict(doc)


def test_zero_length_edge_rejected():
    doc = two_node_doc()
    doc["nodes"][1]["lat"] = 50.0
    with pytest.raises(NetworkError, match="edge 7"):
        network_from_dict(doc)


def test_geometry_must_join_nodes():
    doc = two_node_doc()
    doc["edges"][0]["geometry"] = [[50.0, 14.0], [50.002, 14.0]]
    with pytest.raises(NetworkError, match="edge 7"):
        network_from_dict(doc)


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nodes: ")
    with pytest.raises(NetworkError):
        load_network(p)


def test_lengths_recomputed_from_geometry():
    doc = two_node_doc()
    doc["edges"][0]["length"] = 1.0
    assert network_from_dict(doc).edges[7].length > 100


def test_grid_round_trip(tmp_path, grid10):
    p = tmp_path / "g.json"
    save_network(grid10, p)
    back = load_network(p)
    assert back.to_dict() == grid10.to_dict()
    for eid, e in grid10.edges.items():
        assert back.edges[eid].length == pytest.approx(e.length, abs=1e-6)
        assert back.edges[eid].geometry.points[0] == pytest.approx(e.geometry.points[0], abs=1e-6)


def test_edge_geometry_matches_nodes(grid10):
    for e in grid10.edges.values():
        assert math.dist(e.start, grid10.nodes[e.source].pos) < 1e-6
        assert math.dist(e.end, grid10.nodes[e.target].pos) < 1e-6
        assert e.length == pytest.approx(e.geometry.length)
        assert e.length > 0


def test_out_edges(grid10):
    assert len(grid10.out_edges(55)) == 4
    seen = sorted(eid for n in grid10.nodes for eid in grid10.out_edges(n))
    assert seen == sorted(grid10.edges)
    for n in grid10.nodes:
        assert all(grid10.edges[e].source == n for e in grid10.out_edges(n))
    with pytest.raises(KeyError):
        grid10.out_edges(12345)


def test_dead_end_has_no_out_edges():
    net = net_from_xy({0: (0, 0), 1: (100, 0)}, [(0, 0, 1)])
    assert net.out_edges(1) == ()


def test_edges_within_basics(grid10):
    e = grid10.edges[0]
    q = e.geometry.point_at(e.length / 3)
    assert 0 in grid10.edges_within(q, 1.0)
    far = PlanePoint(5000.0, 5000.0)
    assert grid10.edges_within(far, 10.0) == []
    assert sorted(grid10.edges_within(far, math.inf)) == sorted(grid10.edges)


def test_edges_within_matches_linear_scan(grid10):
    rng = np.random.default_rng(3)
    for _ in range(100):
        q = PlanePoint(*rng.uniform(-550, 550, 2))
        r = float(rng.choice([5.0, 15.0, 50.0, 100.0, 333.0]))
        scan = sorted(eid for eid, e in grid10.edges.items() if project(e.geometry, q).distance <= r)
        assert sorted(grid10.edges_within(q, r)) == scan


def test_edges_within_with_curved_geometry():
    # long curved edge whose bounding box spans many index cells
    pts = [(x, 300 * math.sin(x / 300)) for x in np.linspace(0, 2000, 60)]
    net = net_from_xy({0: pts[0], 1: pts[-1]}, [(0, 0, 1, pts)])
    q = PlanePoint(*pts[30])
    assert net.edges_within(q, 1.0) == [0]
    assert net.edges_near(q, 1.0)[0] == pytest.approx(0.0, abs=1e-6)


def test_shortest_paths_against_enumeration():
    # 3x4 grid; oracle: enumerate simple paths
    from gsmm.evaluation import generate_grid
    net = generate_grid(3, 4, 100.0)

    def best(s, t):
        out = math.inf
        stack = [(s, {s}, 0.0)]
        while stack:
            n, seen, d = stack.pop()
            if n == t:
                out = min(out, d)
                continue
            for eid in net.out_edges(n):
                v = net.edges[eid].target
                if v not in seen:
                    stack.append((v, seen | {v}, d + net.edges[eid].length))
        return out

    for s in net.nodes:
        dist, parent = shortest_paths(net, s)
        for t in net.nodes:
            assert dist[t] == pytest.approx(best(s, t))
            if t != s:
                path = path_edges(parent, net, s, t)
                assert sum(net.edges[e].length for e in path) == pytest.approx(dist[t])


def test_reversed_network_flips_edges(grid10):
    rev = grid10.reversed()
    for eid, e in grid10.edges.items():
        assert (rev.edges[eid].source, rev.edges[eid].target) == (e.target, e.source)
