"""Directed road network with edge geometry and a grid spatial index."""

from __future__ import annotations

import heapq
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NetworkError
from .geo import GeoPoint, PlanePoint, Polyline, project, to_local

_ENDPOINT_TOL = 1e-6


@dataclass(frozen=True)
class Node:
    id: int
    pos: PlanePoint
    geo: GeoPoint


@dataclass(frozen=True)
class Edge:
    id: int
    source: int
    target: int
    geometry: Polyline
    geo_coords: tuple = field(repr=False)
    length: float = field(init=False)
    midpoint: PlanePoint = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "length", self.geometry.length)
        object.__setattr__(self, "midpoint", self.geometry.point_at(self.geometry.length / 2))

    @property
    def start(self) -> PlanePoint:
        return self.geometry.points[0]

    @property
    def end(self) -> PlanePoint:
        return self.geometry.points[-1]


class RoadNetwork:
    """Immutable directed graph; safe to share between concurrent matchers."""

    def __init__(self, nodes: dict[int, Node], edges: dict[int, Edge], origin: GeoPoint,
                 cell_size: float = 250.0):
        self.nodes = nodes
        self.edges = edges
        self.origin = origin
        self.cell_size = float(cell_size)
        out_adj: dict[int, list[int]] = {n: [] for n in nodes}
        in_adj: dict[int, list[int]] = {n: [] for n in nodes}
        for e in sorted(edges.values(), key=lambda e: e.id):
            out_adj[e.source].append(e.id)
            in_adj[e.target].append(e.id)
        self.out_adjacency = {n: tuple(v) for n, v in out_adj.items()}
        self.in_adjacency = {n: tuple(v) for n, v in in_adj.items()}
        self._grid = self._build_grid()

    def __repr__(self):
        return f"RoadNetwork({len(self.nodes)} nodes, {len(self.edges)} edges)"

    @classmethod
    def from_records(cls, nodes: Iterable[tuple[int, float, float]],
                     edges: Iterable[tuple[int, int, int, Sequence[Sequence[float]] | None]],
                     origin: GeoPoint | None = None, cell_size: float = 250.0) -> "RoadNetwork":
        """Build and validate a network from ``(id, lat, lon)`` node records and
        ``(id, from, to, geometry)`` edge records; geometry is a lat/lon list or
        ``None`` for a straight segment."""
        geo_nodes: dict[int, GeoPoint] = {}
        for nid, lat, lon in nodes:
            nid = int(nid)
            if nid in geo_nodes:
                raise NetworkError(f"duplicate node id {nid}")
            try:
                geo_nodes[nid] = GeoPoint(float(lat), float(lon))
            except (TypeError, ValueError) as exc:
                raise NetworkError(f"node {nid}: {exc}") from None
        if not geo_nodes:
            raise NetworkError("network has no nodes")
        if origin is None:
            lats = [p.lat for p in geo_nodes.values()]
            lons = [p.lon for p in geo_nodes.values()]
            origin = GeoPoint((min(lats) + max(lats)) / 2, (min(lons) + max(lons)) / 2)

        node_objs = {nid: Node(nid, to_local(p, origin), p) for nid, p in geo_nodes.items()}
        edge_objs: dict[int, Edge] = {}
        for eid, u, v, geom in edges:
            eid, u, v = int(eid), int(u), int(v)
            if eid in edge_objs:
                raise NetworkError(f"duplicate edge id {eid}")
            for end in (u, v):
                if end not in node_objs:
                    raise NetworkError(f"edge {eid} references missing node {end}")
            if geom is None:
                geom = [(geo_nodes[u].lat, geo_nodes[u].lon), (geo_nodes[v].lat, geo_nodes[v].lon)]
            try:
                coords = tuple((float(lat), float(lon)) for lat, lon in geom)
                pts = [to_local(GeoPoint(lat, lon), origin) for lat, lon in coords]
                line = Polyline(pts)
            except (TypeError, ValueError) as exc:
                raise NetworkError(f"edge {eid}: bad geometry ({exc})") from None
            if line.length <= 0:
                raise NetworkError(f"edge {eid} has zero length")
            if (math.dist(line.points[0], node_objs[u].pos) > _ENDPOINT_TOL
                    or math.dist(line.points[-1], node_objs[v].pos) > _ENDPOINT_TOL):
                raise NetworkError(f"edge {eid} geometry does not join nodes {u} and {v}")
            edge_objs[eid] = Edge(eid, u, v, line, coords)
        return cls(node_objs, edge_objs, origin, cell_size)

    def _cells(self, x0, y0, x1, y1):
        c = self.cell_size
        for ix in range(math.floor(x0 / c), math.floor(x1 / c) + 1):
            for iy in range(math.floor(y0 / c), math.floor(y1 / c) + 1):
                yield ix, iy

    def _build_grid(self):
        # every segment of every edge, flattened, plus a cell -> segments map
        ax, ay, bx, by, owner = [], [], [], [], []
        grid = defaultdict(list)
        for e in sorted(self.edges.values(), key=lambda e: e.id):
            pts = e.geometry.points
            for a, b in zip(pts, pts[1:]):
                k = len(owner)
                ax.append(a.x), ay.append(a.y), bx.append(b.x), by.append(b.y)
                owner.append(e.id)
                for cell in self._cells(min(a.x, b.x), min(a.y, b.y), max(a.x, b.x), max(a.y, b.y)):
                    grid[cell].append(k)
        self._seg_a = np.array([ax, ay], dtype=float).T.reshape(-1, 2)
        self._seg_d = np.array([bx, by], dtype=float).T.reshape(-1, 2) - self._seg_a
        self._seg_l2 = (self._seg_d ** 2).sum(axis=1)
        self._seg_owner = np.array(owner, dtype=np.int64)
        return {cell: np.array(v, dtype=np.int64) for cell, v in grid.items()}

    def edge_distance(self, eid: int, q) -> float:
        return project(self.edges[eid].geometry, q).distance

    def edges_near(self, q, radius: float) -> dict[int, float]:
        """Map of edge id to distance for edges within ``radius`` meters of ``q``."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        if math.isinf(radius):
            segs = np.arange(len(self._seg_owner))
        else:
            cells = [self._grid[c] for c in self._cells(q[0] - radius, q[1] - radius,
                                                         q[0] + radius, q[1] + radius)
                     if c in self._grid]
            if not cells:
                return {}
            segs = np.unique(np.concatenate(cells))
        rel = np.asarray(q, dtype=float)[:2] - self._seg_a[segs]
        dd = self._seg_d[segs]
        t = np.clip((rel * dd).sum(axis=1) / self._seg_l2[segs], 0.0, 1.0)
        d = np.hypot(*(rel - t[:, None] * dd).T)
        out: dict[int, float] = {}
        for eid, di in zip(self._seg_owner[segs].tolist(), d.tolist()):
            if di <= radius and di < out.get(eid, math.inf):
                out[eid] = di
        return dict(sorted(out.items()))

    def edges_within(self, q, radius: float) -> list[int]:
        """Ids of edges whose geometry lies within ``radius`` meters of ``q``."""
        return list(self.edges_near(q, radius))

    def out_edges(self, n: int) -> tuple[int, ...]:
        try:
            return self.out_adjacency[n]
        except KeyError:
            raise KeyError(f"unknown node id {n}") from None

    def in_edges(self, n: int) -> tuple[int, ...]:
        try:
            return self.in_adjacency[n]
        except KeyError:
            raise KeyError(f"unknown node id {n}") from None

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "lat": n.geo.lat, "lon": n.geo.lon}
                      for n in sorted(self.nodes.values(), key=lambda n: n.id)],
            "edges": [{"id": e.id, "from": e.source, "to": e.target,
                       "geometry": [list(c) for c in e.geo_coords]}
                      for e in sorted(self.edges.values(), key=lambda e: e.id)],
        }

    def reversed(self) -> "RoadNetwork":
        """Copy with every edge flipped (same ids, reversed geometry)."""
        nodes = [(n.id, n.geo.lat, n.geo.lon) for n in self.nodes.values()]
        edges = [(e.id, e.target, e.source, e.geo_coords[::-1]) for e in self.edges.values()]
        return RoadNetwork.from_records(nodes, edges, origin=self.origin, cell_size=self.cell_size)


def shortest_paths(net: RoadNetwork, source: int, targets: Iterable[int] = (),
                   cap: float = math.inf) -> tuple[dict[int, float], dict[int, int]]:
    """Length-weighted Dijkstra from node ``source``.

    Stops once every node in ``targets`` is settled or the frontier exceeds
    ``cap`` meters.  Returns settled distances and the parent edge of each
    settled node.
    """
    want = set(targets)
    remaining = want - {source}
    dist = {source: 0.0}
    parent: dict[int, int] = {}
    settled: dict[int, float] = {}
    heap = [(0.0, source)]
    edges = net.edges
    while heap:
        d, u = heapq.heappop(heap)
        if u in settled:
            continue
        if d > cap:
            break
        settled[u] = d
        remaining.discard(u)
        if want and not remaining:
            break
        for eid in net.out_adjacency[u]:
            e = edges[eid]
            nd = d + e.length
            if nd < dist.get(e.target, math.inf) and e.target not in settled:
                dist[e.target] = nd
                parent[e.target] = eid
                heapq.heappush(heap, (nd, e.target))
    return settled, {n: parent[n] for n in settled if n in parent}


def path_edges(parent: dict[int, int], net: RoadNetwork, source: int, target: int) -> list[int]:
    """Edge ids from ``source`` to ``target`` following a parent-edge map."""
    out = []
    n = target
    while n != source:
        eid = parent[n]
        out.append(eid)
        n = net.edges[eid].source
    out.reverse()
    return out


def network_from_dict(doc: dict, cell_size: float = 250.0) -> RoadNetwork:
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise NetworkError("network document needs 'nodes' and 'edges'")
    try:
        nodes = [(n["id"], n["lat"], n["lon"]) for n in doc["nodes"]]
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed node record: missing {exc}") from None
    edges = []
    for i, e in enumerate(doc["edges"]):
        try:
            edges.append((e["id"], e["from"], e["to"], e.get("geometry")))
        except (KeyError, TypeError, AttributeError) as exc:
            raise NetworkError(f"malformed edge record #{i}: missing {exc}") from None
    return RoadNetwork.from_records(nodes, edges, cell_size=cell_size)


def load_network(path, format: str = "canonical-json", cell_size: float = 250.0) -> RoadNetwork:
    if format != "canonical-json":
        raise ValueError(f"unsupported network format {format!r}")
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: {exc}") from None
    return network_from_dict(doc, cell_size)


def save_network(net: RoadNetwork, path) -> None:
    Path(path).write_text(json.dumps(net.to_dict()))
