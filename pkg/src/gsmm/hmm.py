"""Hidden Markov model map matching, the global baseline.

Each measurement gets a column of candidate positions on nearby edges.
Emissions follow a Gaussian noise model; transitions favour candidate
pairs whose route distance agrees with the straight-line distance between
the two measurements.  Viterbi picks the most probable column sequence.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoViableSequence
from .geo import PlanePoint, dist, project
from .graph_search import MatchPath
from .network import RoadNetwork, path_edges, shortest_paths
from .trace import Trace

log = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class HmmConfig:
    sigma: float = 50.0
    beta_t: float = 2.0
    candidate_radius: float = 15.0
    # None: ten times the straight-line distance plus 2 km, per pair
    route_search_cap: float | None = None

    def __post_init__(self):
        if not (self.sigma > 0 and self.beta_t > 0 and self.candidate_radius > 0):
            raise ValueError("sigma, beta_t and candidate_radius must be positive")
        if self.route_search_cap is not None and not self.route_search_cap > 0:
            raise ValueError("route_search_cap must be positive")

    def cap_for(self, d_straight: float) -> float:
        if self.route_search_cap is not None:
            return self.route_search_cap
        return 10.0 * d_straight + 2000.0


@dataclass(frozen=True)
class Candidate:
    edge: int
    point: PlanePoint
    offset_on_edge: float
    emission_logp: float


def emission_logp(d: float, sigma: float) -> float:
    """Log density of a zero-mean Gaussian at distance ``d``."""
    return -0.5 * (d / sigma) ** 2 - math.log(sigma) - _LOG_SQRT_2PI


def transition_logp(d_straight: float, d_route: float, beta_t: float) -> float:
    """Log density of an exponential on ``|d_route - d_straight|``."""
    if math.isinf(d_route):
        return -math.inf
    return -abs(d_route - d_straight) / beta_t - math.log(beta_t)


def find_candidates(net: RoadNetwork, q, cfg: HmmConfig) -> list[Candidate]:
    """One candidate per edge within the radius: the nearest point on it."""
    out = []
    for eid in net.edges_within(q, cfg.candidate_radius):
        p = project(net.edges[eid].geometry, q)
        out.append(Candidate(eid, p.point, p.offset, emission_logp(p.distance, cfg.sigma)))
    return out


def _route(net: RoadNetwork, a: Candidate, b: Candidate, cap: float,
           cache: dict | None = None) -> tuple[float, list[int] | None]:
    # distance and the edges strictly between a.edge and b.edge; a small
    # step backwards on one edge is measurement jitter, not a loop around
    # the block, so it costs its plain length
    if a.edge == b.edge:
        return abs(b.offset_on_edge - a.offset_on_edge), []
    ea, eb = net.edges[a.edge], net.edges[b.edge]
    rest = ea.length - a.offset_on_edge
    if rest + b.offset_on_edge > cap:
        return math.inf, None
    # searches are shared per start node within one lattice column pair
    if cache is not None and ea.target in cache:
        settled, parent = cache[ea.target]
    else:
        settled, parent = shortest_paths(net, ea.target, cap=cap)
        if cache is not None:
            cache[ea.target] = settled, parent
    if eb.source not in settled:
        return math.inf, None
    total = rest + settled[eb.source] + b.offset_on_edge
    if total > cap:
        return math.inf, None
    return total, path_edges(parent, net, ea.target, eb.source)


def route_distance(net: RoadNetwork, a: Candidate, b: Candidate, cap: float = math.inf) -> float:
    """Network distance from candidate ``a`` to candidate ``b``, or inf beyond ``cap``."""
    return _route(net, a, b, cap)[0]


def viterbi(emissions: Sequence[Sequence[float]],
            transitions: Sequence[np.ndarray]) -> tuple[list[int], float]:
    """Most probable state sequence of a lattice.

    ``transitions[k][i, j]`` is the log-probability of going from state ``i``
    of column ``k`` to state ``j`` of column ``k + 1``.  Ties go to the
    smaller state index, from the last column backwards.
    """
    delta = np.asarray(emissions[0], dtype=float)
    back = []
    for k in range(1, len(emissions)):
        scores = delta[:, None] + np.asarray(transitions[k - 1], dtype=float)
        arg = np.argmax(scores, axis=0)
        delta = scores[arg, np.arange(scores.shape[1])] + np.asarray(emissions[k], dtype=float)
        back.append(arg)
    j = int(np.argmax(delta))
    best = float(delta[j])
    if math.isinf(best):
        raise NoViableSequence("every candidate sequence has zero probability")
    seq = [j]
    for arg in reversed(back):
        j = int(arg[j])
        seq.append(j)
    seq.reverse()
    return seq, best


def hmm_match(net: RoadNetwork, tr: Trace, cfg: HmmConfig | None = None) -> MatchPath:
    cfg = cfg or HmmConfig()
    pts = tr.local_points(net.origin)
    cols: list[list[Candidate]] = []
    col_pts: list[PlanePoint] = []
    for i, q in enumerate(pts):
        cands = find_candidates(net, q, cfg)
        if cands:
            cols.append(cands)
            col_pts.append(q)
        else:
            log.debug("measurement %d has no candidate within %g m, skipped", i, cfg.candidate_radius)
    if not cols:
        raise NoViableSequence("no measurement has a candidate edge")
    if len(cols) < len(pts):
        log.info("skipped %d of %d measurements without candidates", len(pts) - len(cols), len(pts))

    transitions = []
    paths: list[list[list[list[int] | None]]] = []
    for k in range(1, len(cols)):
        d_straight = dist(col_pts[k - 1], col_pts[k])
        cap = cfg.cap_for(d_straight)
        cache: dict = {}
        t = np.full((len(cols[k - 1]), len(cols[k])), -math.inf)
        pk = []
        for i, a in enumerate(cols[k - 1]):
            row = []
            for j, b in enumerate(cols[k]):
                d, p = _route(net, a, b, cap, cache)
                t[i, j] = transition_logp(d_straight, d, cfg.beta_t)
                row.append(p)
            pk.append(row)
        transitions.append(t)
        paths.append(pk)

    seq, _ = viterbi([[c.emission_logp for c in col] for col in cols], transitions)
    out = [cols[0][seq[0]].edge]
    for k in range(1, len(cols)):
        between = paths[k - 1][seq[k - 1]][seq[k]]
        b = cols[k][seq[k]]
        if b.edge == cols[k - 1][seq[k - 1]].edge:
            continue
        out.extend(between)
        out.append(b.edge)
    return MatchPath(out)
