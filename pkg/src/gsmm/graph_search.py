"""Graph search based map matching.

The matcher runs a Dijkstra-style label-setting search over the road
network.  The cost of an edge is not static: it measures how well the edge
agrees with the trace linestring, given where along the trace the search
currently is.  Each settled node keeps a fixed projection offset on the
trace, and the neighbours of a node may only project at or after it.

Costs are opaque units; only their ordering matters.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

from .errors import MatchError, NoCandidateEdge, Unreachable
from .geo import Projection, candidate_projections, distances_to, project, project_constrained
from .network import Edge, RoadNetwork, path_edges, shortest_paths
from .trace import Trace, TraceLinestring, build_linestring, split_self_intersecting

log = logging.getLogger(__name__)

# Endpoint scores closer than this (meters) count as ties.
TIE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GsmmConfig:
    alpha: float = 10.0
    beta: float = 3.0
    start_radius: float = 100.0
    candidate_window: float = 100.0
    net_scale: float = 25.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")
        if not (self.start_radius > 0 and self.candidate_window > 0 and self.net_scale > 0):
            raise ValueError("radii must be positive")


@dataclass(frozen=True)
class SearchLabel:
    node: int
    cost: float
    parent_edge: int | None
    proj_offset: float


@dataclass(frozen=True)
class MatchPath:
    edges: tuple[int, ...]
    cost: float | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def is_connected(self, net: RoadNetwork) -> bool:
        return is_connected(net, self.edges)


def is_connected(net: RoadNetwork, edges) -> bool:
    return all(net.edges[a].target == net.edges[b].source for a, b in zip(edges, edges[1:]))


# -- start and destination ------------------------------------------------

def _direction_mismatch(edge: Edge, ts: TraceLinestring) -> float:
    # how badly the edge direction disagrees with the direction of the trace
    a = project(ts.line, edge.start).offset
    b = project(ts.line, edge.end).offset
    return abs(edge.length - (b - a))


def endpoint_scores(net: RoadNetwork, ts: TraceLinestring, q, radius: float,
                    initial: bool = True) -> list[tuple[float, int]]:
    """Score every edge within ``radius`` of ``q`` for the start (or end) of the trace.

    The score is the distance from ``q`` to the edge plus the distance from
    the edge's far node (its end node for the start, its start node for the
    destination) to the trace linestring.
    """
    near = net.edges_near(q, radius)
    if not near:
        return []
    ends = [net.edges[e].end if initial else net.edges[e].start for e in near]
    node_d = distances_to(ts.line, ends).tolist()
    return [(d + nd, eid) for (eid, d), nd in zip(near.items(), node_d)]


def pick_endpoint_edge(scored: list[tuple[float, int]], net: RoadNetwork,
                       ts: TraceLinestring, tol: float = TIE_TOLERANCE) -> int:
    """Argmin of ``scored``.

    Near-ties (within ``tol``) are resolved by agreement between edge
    direction and trace direction, then by the smaller edge id.
    """
    best = min(s for s, _ in scored)
    tied = sorted(eid for s, eid in scored if s <= best + tol)
    if len(tied) == 1:
        return tied[0]
    return min(tied, key=lambda eid: (_direction_mismatch(net.edges[eid], ts), eid))


def select_initial_edge(net: RoadNetwork, ts: TraceLinestring, first, radius: float) -> int:
    scored = endpoint_scores(net, ts, first, radius, initial=True)
    if not scored:
        raise NoCandidateEdge(f"no edge within {radius} m of the first measurement")
    return pick_endpoint_edge(scored, net, ts)


def select_destination_edge(net: RoadNetwork, ts: TraceLinestring, last, radius: float) -> int:
    scored = endpoint_scores(net, ts, last, radius, initial=False)
    if not scored:
        raise NoCandidateEdge(f"no edge within {radius} m of the last measurement")
    return pick_endpoint_edge(scored, net, ts)


# -- costs ----------------------------------------------------------------

def combine_costs(c1: float, c2: float, c3: float, length: float, along: float,
                  alpha: float, beta: float) -> tuple[float, float]:
    """Return ``(c, c_f)``: the agreement cost and the cost with forward bonus."""
    c = (c1 + c2) * length / alpha + c3
    return c, c - beta * along


def edge_cost(edge: Edge, current: SearchLabel, ts: TraceLinestring,
              cfg: GsmmConfig) -> tuple[float, Projection]:
    """Cost of extending ``current`` along ``edge``.

    Every candidate projection of the edge's end node at or after the
    current offset is tried; the cheapest one wins (smaller offset on ties).
    Projections are only sought up to ``edge.length + cfg.candidate_window``
    meters past the current offset, so a node cannot latch onto a much later
    pass of the trace.
    """
    line = ts.line
    here = current.proj_offset
    horizon = here + edge.length + cfg.candidate_window
    c2 = project_constrained(line, edge.midpoint, here, horizon).distance
    best_cf = math.inf
    best_p = None
    for p in candidate_projections(line, edge.end, here, cfg.candidate_window, horizon):
        along = p.offset - here
        _, cf = combine_costs(p.distance, c2, abs(edge.length - along), edge.length, along,
                              cfg.alpha, cfg.beta)
        if cf < best_cf:
            best_cf, best_p = cf, p
    return best_cf, best_p


# -- search ---------------------------------------------------------------

@dataclass
class SearchResult:
    edges: list[int]
    labels: list[SearchLabel]
    cost: float
    expanded: int


def search(net: RoadNetwork, ts: TraceLinestring, n_s: int, n_d: int,
           cfg: GsmmConfig) -> SearchResult:
    """Label-setting search from node ``n_s`` until node ``n_d`` is popped.

    A node is closed the first time it is popped and keeps that label's
    projection offset.  When ``n_s == n_d`` the result is a cycle.
    """
    edges = net.edges
    if n_s not in net.nodes or n_d not in net.nodes:
        raise KeyError(f"unknown node id {n_s if n_s not in net.nodes else n_d}")
    heap = [(0.0, 0, n_s, None, 0.0)]
    seq = 1
    closed: dict[int, SearchLabel] = {}
    final = None
    while heap:
        cost, _, node, parent, offset = heapq.heappop(heap)
        if node == n_d and parent is not None:
            final = SearchLabel(node, cost, parent, offset)
            break
        if node in closed:
            continue
        label = SearchLabel(node, cost, parent, offset)
        closed[node] = label
        for eid in net.out_adjacency[node]:
            e = edges[eid]
            v = e.target
            if v in closed and v != n_d:
                continue
            cf, p = edge_cost(e, label, ts, cfg)
            heapq.heappush(heap, (cost + cf, seq, v, eid, p.offset))
            seq += 1
    if final is None:
        raise Unreachable(f"destination node {n_d} not reachable from {n_s}")

    path_labels = [final]
    while path_labels[-1].parent_edge is not None:
        path_labels.append(closed[edges[path_labels[-1].parent_edge].source])
    path_labels.reverse()
    return SearchResult([lb.parent_edge for lb in path_labels[1:]], path_labels,
                        final.cost, len(closed))


def match(net: RoadNetwork, tr: Trace, cfg: GsmmConfig | None = None) -> MatchPath:
    """Match a trace that does not come back on itself (see :func:`match_full`).

    The search runs from the start node of the initial edge to the end node
    of the destination edge.  The selected edges only pick those two nodes;
    the path is free to leave through a different edge, which lets a poor
    initial choice be corrected.
    """
    cfg = cfg or GsmmConfig()
    ts = build_linestring(tr, net.origin)
    pts = ts.line.points
    e_s = select_initial_edge(net, ts, pts[0], cfg.start_radius)
    e_d = select_destination_edge(net, ts, pts[-1], cfg.start_radius)
    res = search(net, ts, net.edges[e_s].source, net.edges[e_d].target, cfg)
    log.debug("matched %d edges, %d nodes expanded", len(res.edges), res.expanded)
    return MatchPath(res.edges, res.cost)


def match_full(net: RoadNetwork, tr: Trace, cfg: GsmmConfig | None = None) -> MatchPath:
    """Split self-intersecting traces, match every part and join the results.

    A part that starts on the edge the previous part ended on shares that
    edge; parts that do not touch are joined by the shortest connecting path.
    """
    cfg = cfg or GsmmConfig()
    parts = split_self_intersecting(tr, cfg.net_scale, net.origin)
    if len(parts) > 1:
        log.info("trace split into %d parts", len(parts))
    out: list[int] = []
    cost = 0.0
    for k, part in enumerate(parts):
        try:
            m = match(net, part, cfg)
        except MatchError as exc:
            err = type(exc)(f"part {k}: {exc}")
            err.part = k
            raise err from exc
        cost += m.cost
        edges = list(m.edges)
        if out and edges and out[-1] == edges[0]:
            edges = edges[1:]
        if out and edges:
            a, b = net.edges[out[-1]].target, net.edges[edges[0]].source
            if a != b:
                _, parent = shortest_paths(net, a, (b,))
                if b not in parent:
                    raise Unreachable(f"part {k}: cannot join to previous part")
                out.extend(path_edges(parent, net, a, b))
        out.extend(edges)
    return MatchPath(out, cost)
