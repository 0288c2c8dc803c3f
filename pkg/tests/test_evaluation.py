import csv
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gsmm.errors import ZeroGroundTruth
from gsmm.evaluation import (PERIOD_LADDER, ROW_FIELDS, BenchmarkItem, SyntheticScenario,
                             generate_grid, generate_trace, random_route, rmf, route_polyline,
                             run_benchmark, synthetic_dataset)
from gsmm.geo import project, to_local


def stub_net(lengths):
    return SimpleNamespace(edges={k: SimpleNamespace(length=v) for k, v in lengths.items()})


# -- RMF ------------------------------------------------------------------

def test_rmf_perfect():
    net = stub_net({1: 100.0, 2: 250.0})
    assert rmf([1, 2], [1, 2], net).rmf == 0


def test_rmf_worked_example():
    net = stub_net({1: 950.0, 2: 50.0, 3: 100.0})
    b = rmf([1, 2], [1, 3], net)
    assert (b.l_gt, b.l_plus, b.l_minus) == (1000.0, 100.0, 50.0)
    assert b.rmf == 0.15


def test_rmf_disjoint():
    net = stub_net({1: 600.0, 2: 400.0, 3: 500.0, 4: 300.0})
    assert rmf([1, 2], [3, 4], net).rmf == 1.8


def test_rmf_repeated_edges_count_per_occurrence():
    net = stub_net({1: 100.0, 2: 100.0})
    b = rmf([1, 2, 1], [1, 2], net)
    assert b.l_minus == 100.0 and b.l_plus == 0.0


def test_rmf_zero_ground_truth():
    with pytest.raises(ZeroGroundTruth):
        rmf([], [1], stub_net({1: 10.0}))


paths = st.lists(st.integers(0, 5), min_size=1, max_size=8)


@given(paths, paths)
def test_rmf_swap_property(a, b):
    net = stub_net({k: 10.0 * (k + 1) for k in range(6)})
    ab, ba = rmf(a, b, net), rmf(b, a, net)
    assert ab.l_plus == ba.l_minus and ab.l_minus == ba.l_plus
    assert ab.rmf * ab.l_gt == pytest.approx(ba.rmf * ba.l_gt)
    assert ab.rmf >= 0
    assert (ab.rmf == 0) == (sorted(a) == sorted(b))


# -- synthetic data -------------------------------------------------------

def test_grid_counts():
    g2 = generate_grid(2, 2, 100.0)
    assert len(g2.nodes) == 4 and len(g2.edges) == 8
    g10 = generate_grid(10, 10, 100.0)
    assert len(g10.nodes) == 100 and len(g10.edges) == 360
    degrees = {len(g10.out_edges(n)) for n in g10.nodes}
    assert degrees == {2, 3, 4}
    assert all(e.length == pytest.approx(100.0, abs=1e-6) for e in g10.edges.values())


def test_random_route_is_simple_and_connected(grid10):
    rng = np.random.default_rng(0)
    for _ in range(20):
        r = random_route(grid10, 20, rng)
        nodes = [grid10.edges[r[0]].source] + [grid10.edges[e].target for e in r]
        assert len(set(nodes)) == len(nodes)
        assert all(grid10.edges[a].target == grid10.edges[b].source for a, b in zip(r, r[1:]))


def test_noiseless_trace_lies_on_route(grid10, grid_routes):
    tr, gt = generate_trace(SyntheticScenario(grid10, grid_routes[0], 0.0, 1.0, 1))
    line = route_polyline(grid10, gt)
    for m in tr:
        assert project(line, to_local(m.pos, grid10.origin)).distance < 1e-6
    assert gt == grid_routes[0]


def test_trace_is_deterministic(grid10, grid_routes):
    a, _ = generate_trace(SyntheticScenario(grid10, grid_routes[1], 20.0, 1.0, 42))
    b, _ = generate_trace(SyntheticScenario(grid10, grid_routes[1], 20.0, 1.0, 42))
    assert a == b


def test_noise_std(grid10, grid_routes):
    route = grid_routes[2]
    clean, _ = generate_trace(SyntheticScenario(grid10, route, 0.0, 0.01, 5, start_offset=10, end_offset=10))
    noisy, _ = generate_trace(SyntheticScenario(grid10, route, 20.0, 0.01, 5, start_offset=10, end_offset=10))
    assert len(noisy) >= 10_000
    o = grid10.origin
    d = np.array([np.subtract(to_local(a.pos, o), to_local(b.pos, o)) for a, b in zip(noisy, clean)])
    assert d.std(axis=0) == pytest.approx([20.0, 20.0], rel=0.05)


def test_trace_timing(grid10, grid_routes):
    tr, _ = generate_trace(SyntheticScenario(grid10, grid_routes[0], 0.0, 1.0, 0,
                                             start_offset=30, end_offset=30))
    assert tr.times[:3] == [0.0, 1.0, 2.0]
    assert tr.times[-1] == pytest.approx((2000 - 60) / 10)


# -- benchmark ------------------------------------------------------------

@pytest.fixture(scope="module")
def small_dataset():
    return synthetic_dataset(3, seed=99)


def test_one_row(small_dataset):
    rep = run_benchmark(small_dataset[:1], [10], ["gsmm"])
    assert len(rep.rows) == 1
    assert rep.rows[0].success and rep.rows[0].trace_id == small_dataset[0].trace_id


def test_period_ladder():
    assert PERIOD_LADDER == (1, 5, 10, 20, 30, 45, 60, 90, 120, 180, 300)


def test_full_ladder_rows_and_means(small_dataset):
    rep = run_benchmark(small_dataset, PERIOD_LADDER, ["gsmm", "hmm"])
    assert len(rep.rows) == 3 * 11 * 2
    aggs = rep.aggregates()
    assert len(aggs) == 22
    for a in aggs:
        rows = [r for r in rep.rows if r.period_s == a.period_s and r.algorithm == a.algorithm and r.success]
        assert a.mean_rmf == pytest.approx(sum(r.rmf for r in rows) / len(rows))
        assert a.mean_runtime_s == pytest.approx(sum(r.runtime_s for r in rows) / len(rows))


def test_rows_reproducible(small_dataset):
    strip = lambda rep: [(r.trace_id, r.period_s, r.algorithm, r.rmf, r.success) for r in rep.rows]
    a = run_benchmark(small_dataset, [5, 30], ["gsmm", "hmm", "incremental"])
    b = run_benchmark(synthetic_dataset(3, seed=99), [5, 30], ["gsmm", "hmm", "incremental"])
    assert strip(a) == strip(b)


def test_parallel_rows_equal_sequential(small_dataset):
    strip = lambda rep: [(r.trace_id, r.period_s, r.algorithm, r.rmf) for r in rep.rows]
    a = run_benchmark(small_dataset, [10, 60], ["gsmm"])
    b = run_benchmark(small_dataset, [10, 60], ["gsmm"], jobs=2)
    assert strip(a) == strip(b)


def test_failures_are_counted_not_averaged(small_dataset):
    item = small_dataset[0]
    far = BenchmarkItem("far", generate_grid(2, 2, 100.0), item.trace, [0])
    rep = run_benchmark([item, far], [10], ["gsmm"])
    bad = [r for r in rep.rows if not r.success]
    assert len(bad) == 1 and bad[0].trace_id == "far" and math.isnan(bad[0].rmf)
    agg = rep.aggregate(10.0, "gsmm")
    assert agg.n_failed == 1 and agg.n_success == 1
    assert agg.mean_rmf == next(r.rmf for r in rep.rows if r.success)


def test_csv_outputs(tmp_path, small_dataset):
    rep = run_benchmark(small_dataset[:2], [5, 20], ["gsmm", "hmm"])
    rep.write_rows_csv(tmp_path / "rows.csv")
    rep.write_aggregate_csv(tmp_path / "agg.csv")
    with open(tmp_path / "rows.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == ROW_FIELDS and len(rows) == 8
    assert {r["success"] for r in rows} == {"1"}
    with open(tmp_path / "agg.csv") as fh:
        agg = list(csv.DictReader(fh))
    assert len(agg) == 4
    by = {(r["period_s"], r["algorithm"]): float(r["mean_rmf"]) for r in agg}
    for a in rep.aggregates():
        assert by[str(int(a.period_s)), a.algorithm] == pytest.approx(a.mean_rmf)


def test_bad_inputs(small_dataset):
    with pytest.raises(ValueError):
        run_benchmark([], [1], ["gsmm"])
    with pytest.raises(ValueError):
        run_benchmark(small_dataset, [1], ["dijkstra"])
