"""Planar geometry used by the matchers.

Geographic coordinates are mapped to a local metric plane with an
equirectangular approximation; everything downstream works in meters.
Polylines are parameterized by arc length so that points on a trace can be
ordered chronologically by their offset from the trace start.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

EARTH_RADIUS = 6_371_000.0
_DEG = math.pi / 180.0

# polylines up to this many segments are handled without numpy
_SMALL = 8
# offset ranges up to this many meters are scanned without numpy too
_SMALL_SPAN = 400.0
_OFFSET_EPS = 1e-9


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"invalid WGS84 coordinate ({self.lat}, {self.lon})")


class PlanePoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Projection:
    """A point on a polyline closest to some query point.

    ``offset`` is the arc length from the polyline start to ``point`` and
    ``distance`` the Euclidean distance from the query point to ``point``.
    """

    point: PlanePoint
    offset: float
    distance: float


def to_local(p: GeoPoint, origin: GeoPoint) -> PlanePoint:
    """Equirectangular projection of ``p`` into meters around ``origin``."""
    k = EARTH_RADIUS * _DEG
    x = (p.lon - origin.lon) * math.cos(origin.lat * _DEG) * k
    y = (p.lat - origin.lat) * k
    return PlanePoint(x, y)


def to_geo(p: PlanePoint, origin: GeoPoint) -> GeoPoint:
    """Inverse of :func:`to_local`."""
    k = EARTH_RADIUS * _DEG
    lat = origin.lat + p.y / k
    lon = origin.lon + p.x / (k * math.cos(origin.lat * _DEG))
    return GeoPoint(lat, lon)


def dist(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def point_segment_distance(q, a, b) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        return dist(q, a)
    t = ((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / l2
    t = min(1.0, max(0.0, t))
    return math.hypot(q[0] - a[0] - t * dx, q[1] - a[1] - t * dy)


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segment_distance(a, b, c, d) -> float:
    """Minimal distance between segments ab and cd (0 if they cross)."""
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if ((o1 > 0 > o2) or (o1 < 0 < o2)) and ((o3 > 0 > o4) or (o3 < 0 < o4)):
        return 0.0
    return min(
        point_segment_distance(a, c, d),
        point_segment_distance(b, c, d),
        point_segment_distance(c, a, b),
        point_segment_distance(d, a, b),
    )


class Polyline:
    """Immutable polyline with cumulative arc lengths.

    Consecutive duplicate points are collapsed on construction;
    ``index_map[i]`` gives the position in ``points`` that input point ``i``
    ended up at.
    """

    __slots__ = ("points", "cum_len", "index_map", "_ax", "_ay", "_dx", "_dy",
                 "_l2", "_seg", "_cum")

    def __init__(self, points: Sequence[Sequence[float]]):
        kept: list[PlanePoint] = []
        index_map: list[int] = []
        for p in points:
            p = PlanePoint(float(p[0]), float(p[1]))
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ValueError(f"non-finite polyline point {p}")
            # also drop points so close that the squared step underflows
            if not kept or (p.x - kept[-1].x) ** 2 + (p.y - kept[-1].y) ** 2 > 0.0:
                kept.append(p)
            index_map.append(len(kept) - 1)
        if len(kept) < 2:
            raise ValueError("polyline needs at least two distinct points")
        self.points = tuple(kept)
        self.index_map = tuple(index_map)

        xy = np.asarray(kept, dtype=float)
        d = np.diff(xy, axis=0)
        seg = np.hypot(d[:, 0], d[:, 1])
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        self.cum_len = tuple(cum.tolist())
        self._ax, self._ay = xy[:-1, 0].copy(), xy[:-1, 1].copy()
        self._dx, self._dy = d[:, 0].copy(), d[:, 1].copy()
        self._l2 = self._dx * self._dx + self._dy * self._dy
        self._seg = seg
        self._cum = cum

    @property
    def length(self) -> float:
        return self.cum_len[-1]

    @property
    def n_segments(self) -> int:
        return len(self.points) - 1

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"Polyline({len(self.points)} points, {self.length:.1f} m)"

    def point_at(self, offset: float) -> PlanePoint:
        offset = min(max(offset, 0.0), self.length)
        i = self._segment_at(offset)
        t = (offset - self.cum_len[i]) / self._seg[i]
        a = self.points[i]
        return PlanePoint(a.x + t * self._dx[i], a.y + t * self._dy[i])

    def reversed(self) -> "Polyline":
        return Polyline(self.points[::-1])

    def _segment_at(self, offset: float) -> int:
        i = bisect.bisect_right(self.cum_len, offset) - 1
        return min(max(i, 0), len(self.cum_len) - 2)

    def feet(self, q, min_offset: float = 0.0, max_offset: float | None = None):
        """Per-segment closest points to ``q`` with offsets in ``[min_offset, max_offset]``.

        Returns ``(k, t, lo, hi, offsets, px, py, d)`` where the arrays cover
        segments ``k..`` up to the one holding ``max_offset`` (default: the
        end of the line); ``t`` is the segment parameter clamped to
        ``[lo, hi]``.
        """
        k = self._segment_at(min_offset) if min_offset > 0.0 else 0
        stop = self.n_segments
        if max_offset is not None and max_offset < self.length:
            stop = max(self._segment_at(max_offset), k) + 1
        ax, ay = self._ax[k:stop], self._ay[k:stop]
        dx, dy = self._dx[k:stop], self._dy[k:stop]
        seg, cum = self._seg[k:stop], self._cum[k:stop]
        lo = np.zeros(len(ax))
        hi = np.ones(len(ax))
        if min_offset > 0.0:
            lo[0] = min(1.0, max(0.0, (min_offset - cum[0]) / seg[0]))
        if stop < self.n_segments or (max_offset is not None and max_offset < self.length):
            hi[-1] = min(1.0, max(lo[-1], (max_offset - cum[-1]) / seg[-1]))
        qx, qy = q[0], q[1]
        t = ((qx - ax) * dx + (qy - ay) * dy) / self._l2[k:stop]
        t = np.minimum(np.maximum(t, lo), hi)
        px = ax + t * dx
        py = ay + t * dy
        d = np.hypot(qx - px, qy - py)
        offsets = cum + t * seg
        np.clip(offsets, min_offset, self.length, out=offsets)
        return k, t, lo, hi, offsets, px, py, d


def _project_small(line: Polyline, q, min_offset: float, max_offset: float) -> Projection:
    qx, qy = q[0], q[1]
    best = None
    pts, cum = line.points, line.cum_len
    for i in range(line._segment_at(min_offset), line.n_segments):
        if cum[i + 1] < min_offset:
            continue
        if cum[i] > max_offset:
            break
        a, b = pts[i], pts[i + 1]
        dx, dy = b.x - a.x, b.y - a.y
        seg = cum[i + 1] - cum[i]
        lo, hi = 0.0, 1.0
        if cum[i] < min_offset:
            lo = min(1.0, (min_offset - cum[i]) / seg)
        if cum[i + 1] > max_offset:
            hi = max(lo, (max_offset - cum[i]) / seg)
        t = ((qx - a.x) * dx + (qy - a.y) * dy) / (dx * dx + dy * dy)
        t = min(hi, max(lo, t))
        px, py = a.x + t * dx, a.y + t * dy
        d = math.hypot(qx - px, qy - py)
        if best is None or d < best[2]:
            off = min(max(cum[i] + t * seg, min_offset), line.length)
            best = (px, py, d, off)
    return Projection(PlanePoint(best[0], best[1]), best[3], best[2])


def _clamp_range(line: Polyline, min_offset: float, max_offset: float | None):
    lo = min(max(min_offset, 0.0), line.length)
    hi = line.length if max_offset is None else min(max(max_offset, lo), line.length)
    return lo, hi


def project(line: Polyline, q) -> Projection:
    """Globally nearest point of ``line`` to ``q``; ties go to the smaller offset."""
    return project_constrained(line, q, 0.0)


def project_constrained(line: Polyline, q, min_offset: float,
                        max_offset: float | None = None) -> Projection:
    """Nearest point of ``line`` to ``q`` among points with offset >= ``min_offset``
    (and <= ``max_offset`` when given)."""
    lo, hi = _clamp_range(line, min_offset, max_offset)
    if line.n_segments <= _SMALL or hi - lo <= _SMALL_SPAN:
        return _project_small(line, q, lo, hi)
    _, _, _, _, offsets, px, py, d = line.feet(q, lo, hi)
    j = int(np.argmin(d))
    return Projection(PlanePoint(float(px[j]), float(py[j])), float(offsets[j]), float(d[j]))


def _feet_py(line: Polyline, q, lo_off: float, hi_off: float):
    # pure-Python twin of Polyline.feet for a handful of segments
    pts, cum = line.points, line.cum_len
    k = line._segment_at(lo_off) if lo_off > 0.0 else 0
    stop = line.n_segments
    if hi_off < line.length:
        stop = max(line._segment_at(hi_off), k) + 1
    qx, qy = q[0], q[1]
    rows = []
    for i in range(k, stop):
        a, b = pts[i], pts[i + 1]
        dx, dy = b.x - a.x, b.y - a.y
        seg = cum[i + 1] - cum[i]
        lo = min(1.0, max(0.0, (lo_off - cum[i]) / seg)) if i == k and lo_off > 0.0 else 0.0
        hi = 1.0
        if i == stop - 1 and hi_off < line.length:
            hi = min(1.0, max(lo, (hi_off - cum[i]) / seg))
        t = ((qx - a.x) * dx + (qy - a.y) * dy) / (dx * dx + dy * dy)
        t = min(max(t, lo), hi)
        px, py = a.x + t * dx, a.y + t * dy
        off = min(max(cum[i] + t * seg, lo_off), line.length)
        rows.append((t, lo, hi, off, px, py, math.hypot(qx - px, qy - py)))
    return rows


def _feet_rows(line: Polyline, q, lo_off: float, hi_off: float):
    if line.n_segments <= _SMALL or hi_off - lo_off <= _SMALL_SPAN:
        return _feet_py(line, q, lo_off, hi_off)
    _, t, lo, hi, offsets, px, py, d = line.feet(q, lo_off, hi_off)
    return list(zip(t.tolist(), lo.tolist(), hi.tolist(), offsets.tolist(),
                    px.tolist(), py.tolist(), d.tolist()))


def candidate_projections(line: Polyline, q, min_offset: float = 0.0,
                          window: float = 100.0,
                          max_offset: float | None = None) -> list[Projection]:
    """Nearest constrained projection plus nearby alternative local minima.

    The distance from ``q`` to the polyline, as a function of arc length, is
    scanned for local minima over ``[min_offset, max_offset]``.  Every
    minimum within ``window`` meters of arc length of the nearest one is
    returned, sorted by offset.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    lo_off, hi_off = _clamp_range(line, min_offset, max_offset)
    rows = _feet_rows(line, q, lo_off, hi_off)
    n = len(rows)
    nearest = min(range(n), key=lambda j: rows[j][6])
    near_off = rows[nearest][3]
    out: list[Projection] = []
    for j, (t, lo, hi, off, px, py, d) in enumerate(rows):
        if j == nearest:
            is_min = True
        elif lo < t < hi:
            is_min = True
        elif t == hi:
            is_min = j == n - 1 or rows[j + 1][0] == 0.0
        else:
            is_min = j == 0 and t == lo
        if not is_min or abs(off - near_off) > window:
            continue
        if out and off - out[-1].offset <= _OFFSET_EPS:
            if d < out[-1].distance:
                out[-1] = Projection(PlanePoint(px, py), out[-1].offset, d)
            continue
        out.append(Projection(PlanePoint(px, py), off, d))
    return out


def distances_to(line: Polyline, qs) -> np.ndarray:
    """Unconstrained distance from each point of ``qs`` to ``line``."""
    q = np.asarray(qs, dtype=float).reshape(-1, 2)
    qx, qy = q[:, 0:1], q[:, 1:2]
    t = ((qx - line._ax) * line._dx + (qy - line._ay) * line._dy) / line._l2
    np.clip(t, 0.0, 1.0, out=t)
    d = np.hypot(qx - (line._ax + t * line._dx), qy - (line._ay + t * line._dy))
    return d.min(axis=1)


def along_distance(line: Polyline, a: Projection, b: Projection) -> float:
    return abs(b.offset - a.offset)
