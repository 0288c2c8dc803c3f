"""Incremental map matching, the local baseline.

The matcher walks the network edge by edge.  For every new measurement it
scores the current edge and the edges leaving its end node by distance
and heading agreement, looks a few measurements ahead, and commits the
best continuation for good.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .errors import MatchFailure
from .geo import PlanePoint
from .graph_search import MatchPath
from .network import RoadNetwork
from .trace import Trace

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IncrementalConfig:
    mu_d: float = 10.0
    n_d: float = 1.0
    a: float = 0.17
    mu_alpha: float = 10.0
    n_alpha: float = 7.0
    lookahead_depth: int = 4
    start_radius: float = 100.0
    max_skipped: int = 10

    def __post_init__(self):
        if not (self.mu_d > 0 and self.n_d > 0 and self.a > 0 and self.mu_alpha > 0
                and self.n_alpha > 0 and self.start_radius > 0):
            raise ValueError("score parameters and start_radius must be positive")
        if self.lookahead_depth < 1 or self.max_skipped < 0:
            raise ValueError("lookahead_depth must be >= 1 and max_skipped >= 0")


@dataclass(frozen=True)
class StepState:
    current_edge: int
    measurement_index: int
    skipped: int


def distance_score(d: float, cfg: IncrementalConfig) -> float:
    return cfg.mu_d - cfg.a * d ** cfg.n_d


def orientation_score(theta: float, cfg: IncrementalConfig) -> float:
    """Heading agreement; zero for angles of a right angle or more."""
    if theta >= math.pi / 2:
        return 0.0
    return cfg.mu_alpha * math.cos(theta) ** cfg.n_alpha


def _angle(u: tuple[float, float], v: tuple[float, float]) -> float | None:
    nu, nv = math.hypot(*u), math.hypot(*v)
    if nu == 0.0 or nv == 0.0:
        return None
    c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.acos(max(-1.0, min(1.0, c)))


class _Scorer:
    def __init__(self, net: RoadNetwork, pts: list[PlanePoint], cfg: IncrementalConfig):
        self.net, self.pts, self.cfg = net, pts, cfg
        self._cache: dict[tuple[int, int], float] = {}
        self._ahead: dict[tuple[int, int, int], float] = {}

    def score(self, eid: int, i: int) -> float:
        key = (eid, i)
        s = self._cache.get(key)
        if s is None:
            e = self.net.edges[eid]
            s = distance_score(self.net.edge_distance(eid, self.pts[i]), self.cfg)
            if i > 0:
                p, q = self.pts[i - 1], self.pts[i]
                theta = _angle((q.x - p.x, q.y - p.y), (e.end.x - e.start.x, e.end.y - e.start.y))
                if theta is not None:
                    s += orientation_score(theta, self.cfg)
            self._cache[key] = s
        return s

    def options(self, eid: int) -> list[int]:
        # stay on the edge or leave through its end node
        out = [eid]
        out.extend(x for x in self.net.out_adjacency[self.net.edges[eid].target] if x != eid)
        return out

    def lookahead(self, eid: int, i: int, depth: int) -> float:
        """Score of ``eid`` for measurement ``i`` plus the best continuation
        over the next ``depth - 1`` measurements."""
        key = (eid, i, depth)
        s = self._ahead.get(key)
        if s is None:
            s = self.score(eid, i)
            if depth > 1 and i + 1 < len(self.pts):
                s += max(self.lookahead(x, i + 1, depth - 1) for x in self.options(eid))
            self._ahead[key] = s
        return s


def initial_edge(net: RoadNetwork, pts: list[PlanePoint], cfg: IncrementalConfig) -> int:
    """Best distance score near the first measurement.

    Ties (e.g. the two directions of a street) go to better heading
    agreement with the first trace segment, then to the smaller id.
    """
    near = net.edges_near(pts[0], cfg.start_radius)
    if not near:
        raise MatchFailure(0, f"no edge within {cfg.start_radius} m of the first measurement")
    best = max(distance_score(d, cfg) for d in near.values())
    tied = [e for e, d in near.items() if distance_score(d, cfg) >= best - 1e-9]
    if len(tied) == 1 or len(pts) < 2:
        return tied[0]
    return max(tied, key=lambda e: (_heading(net, pts, e, cfg), -e))


def _heading(net: RoadNetwork, pts: list[PlanePoint], eid: int, cfg: IncrementalConfig) -> float:
    e = net.edges[eid]
    theta = _angle((pts[1].x - pts[0].x, pts[1].y - pts[0].y), (e.end.x - e.start.x, e.end.y - e.start.y))
    return 0.0 if theta is None else orientation_score(theta, cfg)


def incremental_match(net: RoadNetwork, tr: Trace, cfg: IncrementalConfig | None = None) -> MatchPath:
    cfg = cfg or IncrementalConfig()
    pts = tr.local_points(net.origin)
    state = StepState(initial_edge(net, pts, cfg), 0, 0)
    path = [state.current_edge]
    scorer = _Scorer(net, pts, cfg)
    for i in range(1, len(pts)):
        opts = scorer.options(state.current_edge)
        if max(scorer.score(x, i) for x in opts) <= 0.0:
            skipped = state.skipped + 1
            if skipped > cfg.max_skipped:
                raise MatchFailure(i, f"measurement {i}: more than {cfg.max_skipped} "
                                      "consecutive measurements could not be matched")
            state = StepState(state.current_edge, i, skipped)
            continue
        # first maximum wins, so staying on the current edge is preferred on ties
        best = max(opts, key=lambda x: (scorer.lookahead(x, i, cfg.lookahead_depth), -opts.index(x)))
        if best != state.current_edge:
            path.append(best)
        state = StepState(best, i, 0)
    log.debug("incremental match: %d edges", len(path))
    return MatchPath(path)
