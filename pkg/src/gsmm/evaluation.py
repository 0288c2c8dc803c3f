"""Accuracy metric, synthetic scenarios and the benchmark harness."""

from __future__ import annotations

import csv
import logging
import math
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ZeroGroundTruth
from .geo import GeoPoint, PlanePoint, Polyline, to_geo
from .network import RoadNetwork
from .trace import Measurement, Trace, subsample

log = logging.getLogger(__name__)

DEFAULT_ORIGIN = GeoPoint(50.0755, 14.4378)
PERIOD_LADDER = (1, 5, 10, 20, 30, 45, 60, 90, 120, 180, 300)


@dataclass(frozen=True)
class RmfBreakdown:
    l_gt: float
    l_plus: float
    l_minus: float

    @property
    def rmf(self) -> float:
        return (self.l_plus + self.l_minus) / self.l_gt


def rmf(gt: Iterable[int], m: Iterable[int], net: RoadNetwork) -> RmfBreakdown:
    """Route mismatch fraction of match ``m`` against ground truth ``gt``.

    Paths are compared as multisets of (directed) edge ids.
    """
    gt_c, m_c = Counter(gt), Counter(m)
    length = lambda c: sum(net.edges[e].length * k for e, k in c.items())
    l_gt = length(gt_c)
    if l_gt <= 0:
        raise ZeroGroundTruth("ground truth has zero length")
    return RmfBreakdown(l_gt, length(m_c - gt_c), length(gt_c - m_c))


# -- synthetic data -------------------------------------------------------

def generate_grid(rows: int, cols: int, block: float = 100.0,
                  origin: GeoPoint = DEFAULT_ORIGIN) -> RoadNetwork:
    """Lattice of ``rows x cols`` nodes ``block`` meters apart, two-way streets.

    Node ``r * cols + c`` sits at row ``r``, column ``c``; the lattice is
    centred on ``origin``.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("grid needs at least two nodes")
    nodes = []
    for r in range(rows):
        for c in range(cols):
            p = PlanePoint((c - (cols - 1) / 2) * block, (r - (rows - 1) / 2) * block)
            g = to_geo(p, origin)
            nodes.append((r * cols + c, g.lat, g.lon))
    edges = []
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            for dr, dc in ((0, 1), (1, 0)):
                if r + dr < rows and c + dc < cols:
                    m = (r + dr) * cols + c + dc
                    edges.append((len(edges), n, m, None))
                    edges.append((len(edges), m, n, None))
    return RoadNetwork.from_records(nodes, edges)


def random_route(net: RoadNetwork, n_edges: int, rng: np.random.Generator,
                 simple: bool = True, max_tries: int = 1000) -> list[int]:
    """Random walk of ``n_edges`` edges; with ``simple`` no node repeats.

    Non-simple walks still never turn straight back along the edge they came on.
    """
    node_ids = sorted(net.nodes)
    for _ in range(max_tries):
        node = node_ids[rng.integers(len(node_ids))]
        seen = {node}
        route: list[int] = []
        while len(route) < n_edges:
            opts = [e for e in net.out_adjacency[node]
                    if not (simple and net.edges[e].target in seen)
                    and not (route and net.edges[e].target == net.edges[route[-1]].source)]
            if not opts:
                break
            eid = opts[rng.integers(len(opts))]
            route.append(eid)
            node = net.edges[eid].target
            seen.add(node)
        if len(route) == n_edges:
            return route
    raise RuntimeError(f"could not draw a route of {n_edges} edges")


def route_polyline(net: RoadNetwork, route: Sequence[int]) -> Polyline:
    pts: list[PlanePoint] = []
    for eid in route:
        pts.extend(net.edges[eid].geometry.points)
    return Polyline(pts)


@dataclass
class SyntheticScenario:
    """A drive along ``route``.

    The drive starts ``start_offset`` meters into the first edge and stops
    ``end_offset`` meters before the end of the last one; ``None`` draws each
    uniformly from 20-45 % of the edge length.
    """

    network: RoadNetwork
    route: list[int]
    noise_sigma: float = 0.0
    period: float = 1.0
    rng_seed: int = 0
    speed: float = 10.0
    start_offset: float | None = None
    end_offset: float | None = None


def generate_trace(scn: SyntheticScenario) -> tuple[Trace, list[int]]:
    """Drive the route at constant speed, logging a noisy position every period.

    The final position is always logged.  Returns the trace and the ground
    truth (the route itself).
    """
    rng = np.random.default_rng(scn.rng_seed)
    edges = scn.network.edges
    first, last = edges[scn.route[0]].length, edges[scn.route[-1]].length
    s0 = scn.start_offset if scn.start_offset is not None else rng.uniform(0.2, 0.45) * first
    s1 = scn.end_offset if scn.end_offset is not None else rng.uniform(0.2, 0.45) * last
    line = route_polyline(scn.network, scn.route)
    if s0 < 0 or s1 < 0 or s0 + s1 >= line.length:
        raise ValueError("start/end offsets leave nothing to drive")
    t_end = (line.length - s0 - s1) / scn.speed
    times = list(np.arange(0.0, t_end, scn.period))
    if t_end - times[-1] > 1e-9:
        times.append(t_end)
    noise = rng.normal(0.0, scn.noise_sigma, size=(len(times), 2)) if scn.noise_sigma > 0 \
        else np.zeros((len(times), 2))
    ms = []
    for t, (nx, ny) in zip(times, noise):
        p = line.point_at(s0 + t * scn.speed)
        g = to_geo(PlanePoint(p.x + nx, p.y + ny), scn.network.origin)
        ms.append(Measurement(g, float(t)))
    return Trace(ms), list(scn.route)


def synthetic_dataset(n_traces: int = 50, rows: int = 10, cols: int = 10, block: float = 100.0,
                      route_len: int = 20, noise_sigma: float = 5.0, seed: int = 12345,
                      period: float = 1.0) -> list["BenchmarkItem"]:
    """Seeded 1 Hz traces of random simple routes on one shared grid."""
    net = generate_grid(rows, cols, block)
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n_traces):
        route = random_route(net, route_len, rng)
        tr, gt = generate_trace(SyntheticScenario(net, route, noise_sigma, period, seed * 1000 + i))
        items.append(BenchmarkItem(f"t{i:04d}", net, tr, gt))
    return items


# -- benchmark ------------------------------------------------------------

@dataclass
class BenchmarkItem:
    trace_id: str
    network: RoadNetwork
    trace: Trace
    ground_truth: list[int]


@dataclass(frozen=True)
class BenchmarkRow:
    trace_id: str
    period_s: float
    algorithm: str
    rmf: float
    l_gt: float
    l_plus: float
    l_minus: float
    runtime_s: float
    success: bool
    error: str = ""


@dataclass(frozen=True)
class Aggregate:
    period_s: float
    algorithm: str
    mean_rmf: float
    mean_runtime_s: float
    n_success: int
    n_failed: int


ROW_FIELDS = ("trace_id", "period_s", "algorithm", "rmf", "l_gt", "l_plus", "l_minus",
              "runtime_s", "success")
AGG_FIELDS = ("period_s", "algorithm", "mean_rmf", "mean_runtime_s", "n_success", "n_failed")


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow] = field(default_factory=list)

    def aggregates(self) -> list[Aggregate]:
        """Means per (period, algorithm); failed rows are counted, not averaged."""
        groups: dict[tuple[float, str], list[BenchmarkRow]] = defaultdict(list)
        for r in self.rows:
            groups[r.period_s, r.algorithm].append(r)
        out = []
        for (p, alg), rs in sorted(groups.items()):
            ok = [r for r in rs if r.success]
            out.append(Aggregate(
                p, alg,
                float(np.mean([r.rmf for r in ok])) if ok else math.nan,
                float(np.mean([r.runtime_s for r in ok])) if ok else math.nan,
                len(ok), len(rs) - len(ok)))
        return out

    def aggregate(self, period: float, algorithm: str) -> Aggregate:
        for a in self.aggregates():
            if a.period_s == period and a.algorithm == algorithm:
                return a
        raise KeyError((period, algorithm))

    def write_rows_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ROW_FIELDS)
            for r in self.rows:
                w.writerow([r.trace_id, _num(r.period_s), r.algorithm, _num(r.rmf), _num(r.l_gt),
                            _num(r.l_plus), _num(r.l_minus), f"{r.runtime_s:.6f}", int(r.success)])

    def write_aggregate_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(AGG_FIELDS)
            for a in self.aggregates():
                w.writerow([_num(a.period_s), a.algorithm, _num(a.mean_rmf),
                            f"{a.mean_runtime_s:.6f}", a.n_success, a.n_failed])

    def table(self) -> str:
        lines = [f"{'period_s':>8}  {'algorithm':<12} {'mean_rmf':>9} {'runtime_ms':>10} {'failed':>6}"]
        for a in self.aggregates():
            lines.append(f"{_num(a.period_s):>8}  {a.algorithm:<12} {a.mean_rmf:9.4f} "
                         f"{1000 * a.mean_runtime_s:10.2f} {a.n_failed:6d}")
        return "\n".join(lines)


def _num(x: float) -> str:
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return repr(x) if isinstance(x, float) else str(x)


def _matchers() -> dict[str, Callable]:
    from .graph_search import match_full
    from .hmm import hmm_match
    from .incremental import incremental_match
    return {"gsmm": match_full, "hmm": hmm_match, "incremental": incremental_match}


ALGORITHMS = ("gsmm", "hmm", "incremental")


def run_one(item: BenchmarkItem, period: float, algorithm: str, config=None) -> BenchmarkRow:
    """Subsample, match and score one (trace, period, algorithm) cell.

    GSMM splits self-intersecting traces itself (``match_full``); the
    baselines iterate over the measurements and take the whole trace.
    Match errors become ``success = False`` rows.
    """
    fn = _matchers()[algorithm]
    tr = subsample(item.trace, period)
    t0 = time.perf_counter()
    try:
        m = fn(item.network, tr, config)
    except Exception as exc:  # a failed cell must not stop the sweep
        dt = time.perf_counter() - t0
        log.debug("%s %s @ %gs failed: %s", item.trace_id, algorithm, period, exc)
        l_gt = rmf(item.ground_truth, [], item.network).l_gt
        return BenchmarkRow(item.trace_id, float(period), algorithm, math.nan, l_gt, math.nan,
                            math.nan, dt, False, f"{type(exc).__name__}: {exc}")
    dt = time.perf_counter() - t0
    b = rmf(item.ground_truth, m.edges, item.network)
    return BenchmarkRow(item.trace_id, float(period), algorithm, b.rmf, b.l_gt, b.l_plus,
                        b.l_minus, dt, True)


def _run_cell(args):
    return run_one(*args)


def run_benchmark(dataset: Sequence[BenchmarkItem], periods: Sequence[float] = PERIOD_LADDER,
                  algs: Sequence[str] = ("gsmm", "hmm"), configs: dict | None = None,
                  jobs: int = 1) -> BenchmarkReport:
    """Run every algorithm on every trace at every sampling period.

    Rows come out sorted by (trace, period, algorithm) whatever ``jobs`` is.
    Parallel runs share the CPU, so timings are only comparable with
    ``jobs = 1``.
    """
    if not dataset or not periods or not algs:
        raise ValueError("dataset, periods and algs must be non-empty")
    unknown = set(algs) - set(ALGORITHMS)
    if unknown:
        raise ValueError(f"unknown algorithms {sorted(unknown)}")
    configs = configs or {}
    tasks = [(item, p, a, configs.get(a)) for item in dataset for p in periods for a in algs]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_run_cell(t) for t in tasks]
    order = {a: k for k, a in enumerate(algs)}
    rows.sort(key=lambda r: (r.trace_id, r.period_s, order[r.algorithm]))
    return BenchmarkReport(rows)
