import numpy as np
import pytest

from gsmm.evaluation import SyntheticScenario, generate_grid, generate_trace, random_route
from gsmm.geo import GeoPoint, PlanePoint, to_geo
from gsmm.network import RoadNetwork
from gsmm.trace import Measurement, Trace

ORIGIN = GeoPoint(50.0755, 14.4378)


@pytest.fixture(scope="session")
def grid10():
    return generate_grid(10, 10, 100.0)


@pytest.fixture(scope="session")
def grid_routes(grid10):
    rng = np.random.default_rng(12345)
    return [random_route(grid10, 20, rng) for _ in range(50)]


def trace_from_xy(xy, origin=ORIGIN, dt=1.0):
    """Trace through local-plane points, one second apart."""
    return Trace(Measurement(to_geo(PlanePoint(x, y), origin), i * dt) for i, (x, y) in enumerate(xy))


def net_from_xy(nodes, edges, origin=ORIGIN):
    """Network from ``{id: (x, y)}`` and ``[(id, u, v)]`` or ``[(id, u, v, [(x, y), ...])]``."""
    recs = []
    for nid, (x, y) in nodes.items():
        g = to_geo(PlanePoint(x, y), origin)
        recs.append((nid, g.lat, g.lon))
    erecs = []
    for e in edges:
        geom = None
        if len(e) > 3 and e[3] is not None:
            geom = [(g.lat, g.lon) for g in (to_geo(PlanePoint(x, y), origin) for x, y in e[3])]
        erecs.append((e[0], e[1], e[2], geom))
    return RoadNetwork.from_records(recs, erecs, origin=origin)


def noiseless(net, route, period=1.0, seed=0):
    return generate_trace(SyntheticScenario(net, route, 0.0, period, seed))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
