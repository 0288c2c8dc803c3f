"""Traces of timed location measurements and their preprocessing."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import TraceError
from .geo import GeoPoint, PlanePoint, Polyline, segment_distance, to_local


@dataclass(frozen=True)
class Measurement:
    pos: GeoPoint
    time: float


class Trace:
    """Time-ordered measurements (at least two, strictly increasing time)."""

    __slots__ = ("measurements",)

    def __init__(self, measurements: Iterable[Measurement]):
        ms = tuple(measurements)
        if len(ms) < 2:
            raise TraceError("a trace needs at least two measurements")
        for i, m in enumerate(ms):
            if not math.isfinite(m.time):
                raise TraceError(f"measurement {i} has non-finite time")
            if i and m.time <= ms[i - 1].time:
                raise TraceError(f"measurement {i}: time not strictly increasing")
        self.measurements = ms

    def __len__(self):
        return len(self.measurements)

    def __getitem__(self, i):
        return self.measurements[i]

    def __iter__(self):
        return iter(self.measurements)

    def __eq__(self, other):
        return isinstance(other, Trace) and self.measurements == other.measurements

    def __repr__(self):
        return f"Trace({len(self)} measurements, {self.duration:.0f} s)"

    @property
    def times(self) -> list[float]:
        return [m.time for m in self.measurements]

    @property
    def duration(self) -> float:
        return self.measurements[-1].time - self.measurements[0].time

    def reversed(self) -> "Trace":
        """Same positions visited backwards, re-timed so time still increases."""
        t_end = self.measurements[-1].time
        return Trace(Measurement(m.pos, t_end - m.time) for m in reversed(self.measurements))

    def local_points(self, origin: GeoPoint) -> list[PlanePoint]:
        return [to_local(m.pos, origin) for m in self.measurements]


@dataclass(frozen=True)
class TraceLinestring:
    line: Polyline
    origin: GeoPoint

    @property
    def index_map(self) -> tuple[int, ...]:
        return self.line.index_map


def build_linestring(tr: Trace, origin: GeoPoint | None = None) -> TraceLinestring:
    """Connect the measurements in order in a local metric plane.

    The plane is anchored at the first measurement unless ``origin`` is
    given; matchers pass the network origin so that both live in one plane.
    """
    if origin is None:
        origin = tr[0].pos
    pts = tr.local_points(origin)
    if all(p == pts[0] for p in pts):
        raise TraceError("trace has no movement")
    return TraceLinestring(Polyline(pts), origin)


def subsample(tr: Trace, period: float) -> Trace:
    """Greedy resampling to at most one measurement per ``period`` seconds.

    The first and the last measurement are always kept.
    """
    if period <= 0:
        raise ValueError("period must be positive")
    ms = tr.measurements
    kept = [ms[0]]
    for m in ms[1:]:
        if m.time >= kept[-1].time + period:
            kept.append(m)
    if kept[-1] is not ms[-1]:
        kept.append(ms[-1])
    return Trace(kept)


def _point_seg_dists(xy: np.ndarray, a, b) -> np.ndarray:
    d = b - a
    l2 = float(d @ d)
    if l2 == 0.0:
        return np.hypot(*(xy - a).T)
    t = np.clip((xy - a) @ d / l2, 0.0, 1.0)
    return np.hypot(*(xy - a - t[:, None] * d).T)


def first_self_intersection(pts: Sequence[PlanePoint], net_scale: float = 25.0,
                            start: int = 0, stop: int | None = None) -> int | None:
    """Index of the first segment at which the trace returns to an earlier place.

    Segment ``j`` (from point ``j`` to ``j+1``) is flagged when it passes
    within ``net_scale`` meters of an earlier, non-adjacent segment ``i``
    and the trace went more than ``3 * net_scale`` meters away from segment
    ``i`` in between.  Only segments of ``pts[start:stop]`` are considered.
    """
    if stop is None:
        stop = len(pts)
    sub = pts[start:stop]
    if len(sub) < 4:
        return None
    xy = np.asarray(sub, dtype=float)
    lo = np.minimum(xy[:-1], xy[1:])
    hi = np.maximum(xy[:-1], xy[1:])
    cum = np.concatenate(([0.0], np.cumsum(np.hypot(*np.diff(xy, axis=0).T))))
    leave = 3.0 * net_scale
    # leaving segment i by more than `leave` and coming back within
    # net_scale takes more than leave + (leave - net_scale) of arc length
    min_arc = 2.0 * leave - net_scale
    for j in range(2, len(sub) - 1):
        m = int(np.searchsorted(cum, cum[j + 1] - min_arc, side="left"))
        m = min(m, j - 1)
        if m <= 0:
            continue
        gx = np.maximum(lo[:m, 0] - hi[j, 0], lo[j, 0] - hi[:m, 0])
        gy = np.maximum(lo[:m, 1] - hi[j, 1], lo[j, 1] - hi[:m, 1])
        near = np.flatnonzero(np.hypot(np.maximum(gx, 0), np.maximum(gy, 0)) <= net_scale)
        for i in near:
            if segment_distance(sub[i], sub[i + 1], sub[j], sub[j + 1]) > net_scale:
                continue
            if _point_seg_dists(xy[i + 2:j + 1], xy[i], xy[i + 1]).max() > leave:
                return start + j
    return None


def is_self_intersecting(tr: Trace, net_scale: float = 25.0, origin: GeoPoint | None = None) -> bool:
    return first_self_intersection(tr.local_points(origin or tr[0].pos), net_scale) is not None


def split_self_intersecting(tr: Trace, net_scale: float = 25.0,
                            origin: GeoPoint | None = None) -> list[Trace]:
    """Cut a trace into parts none of which comes back close to itself.

    Each cut measurement ends one part and starts the next.
    """
    pts = tr.local_points(origin or tr[0].pos)
    ms = tr.measurements
    parts = []
    start = 0
    while True:
        j = first_self_intersection(pts, net_scale, start)
        if j is None:
            break
        parts.append(Trace(ms[start:j + 1]))
        start = j
    parts.append(Trace(ms[start:]))
    return parts


# -- file formats ---------------------------------------------------------

def trace_from_records(records: Iterable[dict]) -> Trace:
    ms = []
    for i, r in enumerate(records):
        try:
            ms.append(Measurement(GeoPoint(float(r["lat"]), float(r["lon"])), float(r["time"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"measurement {i}: {exc}") from None
    return Trace(ms)


def trace_to_records(tr: Trace) -> list[dict]:
    return [{"lat": m.pos.lat, "lon": m.pos.lon, "time": m.time} for m in tr]


def load_trace(path) -> Trace:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise TraceError(f"{path}: {exc}") from None
    if not isinstance(doc, list):
        raise TraceError(f"{path}: expected a list of measurements")
    return trace_from_records(doc)


def save_trace(tr: Trace, path) -> None:
    Path(path).write_text(json.dumps(trace_to_records(tr)))


def load_ground_truth(path) -> list[int]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise TraceError(f"{path}: {exc}") from None
    if not isinstance(doc, list) or not all(isinstance(e, int) for e in doc):
        raise TraceError(f"{path}: ground truth must be a list of edge ids")
    return doc


def save_ground_truth(edges: Sequence[int], path) -> None:
    Path(path).write_text(json.dumps([int(e) for e in edges]))


def read_csv_trace(path) -> Trace:
    """Read a CSV with ``lat``, ``lon`` and ``time`` columns (header required)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"lat", "lon", "time"} - set(reader.fieldnames or ())
        if missing:
            raise TraceError(f"{path}: missing columns {sorted(missing)}")
        ms = []
        for row in reader:
            try:
                ms.append(Measurement(GeoPoint(float(row["lat"]), float(row["lon"])),
                                      float(row["time"])))
            except (TypeError, ValueError) as exc:
                raise TraceError(f"{path}: line {reader.line_num}: {exc}") from None
    try:
        return Trace(ms)
    except TraceError as exc:
        raise TraceError(f"{path}: {exc}") from None
