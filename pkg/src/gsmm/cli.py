"""Command-line interface: match, benchmark, synth and convert.

Exit codes: 0 success, 1 the matcher found no path, 2 bad input.
Set GSMM_LOG to error, warn, info or debug for more or less logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import MatchError, MatchFailure, NetworkError, TraceError
from .evaluation import (ALGORITHMS, PERIOD_LADDER, BenchmarkItem, SyntheticScenario,
                         generate_grid, generate_trace, random_route, run_benchmark,
                         synthetic_dataset)
from .geo import GeoPoint
from .graph_search import GsmmConfig, match_full
from .hmm import HmmConfig, hmm_match
from .incremental import incremental_match
from .network import RoadNetwork, load_network, network_from_dict, save_network
from .trace import (Measurement, Trace, load_ground_truth, load_trace, read_csv_trace,
                    save_ground_truth, save_trace)

log = logging.getLogger("gsmm")

EXIT_OK, EXIT_NO_MATCH, EXIT_INPUT = 0, 1, 2

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


class InputError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("GSMM_LOG", "warn").lower()
    logging.basicConfig(level=_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level not in _LEVELS:
        log.warning("unknown GSMM_LOG level %r, using warn", level)


# -- match ----------------------------------------------------------------

def _path_geojson(net: RoadNetwork, edges) -> dict:
    coords: list[list[float]] = []
    for eid in edges:
        for lat, lon in net.edges[eid].geo_coords:
            if not coords or coords[-1] != [lon, lat]:
                coords.append([lon, lat])
    return {"type": "Feature", "properties": {"edges": list(edges)},
            "geometry": {"type": "LineString", "coordinates": coords}}


def cmd_match(args) -> int:
    net = load_network(args.network)
    tr = load_trace(args.trace)
    alg = args.algorithm
    if alg == "gsmm":
        cfg = GsmmConfig(alpha=args.alpha, beta=args.beta)
        m = match_full(net, tr, cfg)
    elif alg == "hmm":
        m = hmm_match(net, tr, HmmConfig(sigma=args.sigma))
    else:
        m = incremental_match(net, tr)
    edges = list(m.edges)
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(edges))
        out.with_suffix(".geojson").write_text(json.dumps(_path_geojson(net, edges)))
    else:
        print(json.dumps(edges))
    log.info("matched %d edges", len(edges))
    return EXIT_OK


# -- datasets -------------------------------------------------------------

def load_dataset(root) -> list[BenchmarkItem]:
    """Read ``network.json`` (or ``networks/<id>.json``), ``traces/<id>.json``
    and ``truth/<id>.json`` under ``root``."""
    root = Path(root)
    tdir, gdir = root / "traces", root / "truth"
    if not tdir.is_dir() or not gdir.is_dir():
        raise InputError(f"{root}: expected traces/ and truth/ directories")
    shared = load_network(root / "network.json") if (root / "network.json").exists() else None
    items = []
    for tp in sorted(tdir.glob("*.json")):
        tid = tp.stem
        gp = gdir / f"{tid}.json"
        if not gp.exists():
            raise InputError(f"{root}: no ground truth for trace {tid}")
        net = shared
        if net is None:
            np_ = root / "networks" / f"{tid}.json"
            if not np_.exists():
                raise InputError(f"{root}: no network.json and no networks/{tid}.json")
            net = load_network(np_)
        gt = load_ground_truth(gp)
        missing = [e for e in gt if e not in net.edges]
        if missing:
            raise InputError(f"{gp}: unknown edge ids {missing[:5]}")
        items.append(BenchmarkItem(tid, net, load_trace(tp), gt))
    if not items:
        raise InputError(f"{root}: no traces found")
    return items


def save_dataset(items, root, shared_network: bool = True) -> None:
    root = Path(root)
    (root / "traces").mkdir(parents=True, exist_ok=True)
    (root / "truth").mkdir(exist_ok=True)
    if shared_network:
        save_network(items[0].network, root / "network.json")
    else:
        (root / "networks").mkdir(exist_ok=True)
    for it in items:
        if not shared_network:
            save_network(it.network, root / "networks" / f"{it.trace_id}.json")
        save_trace(it.trace, root / "traces" / f"{it.trace_id}.json")
        save_ground_truth(it.ground_truth, root / "truth" / f"{it.trace_id}.json")


# -- benchmark ------------------------------------------------------------

def _floats(s: str) -> list[float]:
    try:
        vals = [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {s!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("periods must be positive")
    return vals


def _algs(s: str) -> list[str]:
    vals = [x.strip() for x in s.split(",") if x.strip()]
    bad = [a for a in vals if a not in ALGORITHMS]
    if not vals or bad:
        raise argparse.ArgumentTypeError(f"algorithms must be among {', '.join(ALGORITHMS)}")
    return vals


def cmd_benchmark(args) -> int:
    if args.dataset:
        items = load_dataset(args.dataset)
    else:
        items = synthetic_dataset(args.traces, noise_sigma=args.noise, seed=args.seed)
    report = run_benchmark(items, args.periods, args.algorithms, jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_rows_csv(out / "rows.csv")
    report.write_aggregate_csv(out / "aggregate.csv")
    print(report.table())
    return EXIT_OK


# -- synth ----------------------------------------------------------------

def cmd_synth(args) -> int:
    net = generate_grid(args.rows, args.cols, args.block)
    rng = np.random.default_rng(args.seed)
    items = []
    for i in range(args.count):
        route = random_route(net, args.route_len, rng)
        tr, gt = generate_trace(SyntheticScenario(net, route, args.noise, args.period,
                                                  args.seed * 1000 + i))
        items.append(BenchmarkItem(f"t{i:04d}", net, tr, gt))
    save_dataset(items, args.out_dir)
    print(f"wrote {len(items)} trace(s) to {args.out_dir}")
    return EXIT_OK


# -- convert --------------------------------------------------------------

def _read_rows(path: Path, ncols: int) -> list[list[float]]:
    rows = []
    for k, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        try:
            rows.append([float(x) for x in parts[:ncols]])
        except ValueError:
            raise InputError(f"{path}: line {k}: cannot parse {line!r}") from None
        if len(rows[-1]) < ncols:
            raise InputError(f"{path}: line {k}: expected {ncols} columns")
    return rows


def convert_zenodo(src: Path, out: Path) -> int:
    """Per trace ``<id>.nodes`` (lon lat), ``<id>.arcs`` (from to, node line
    numbers), ``<id>.track`` (lon lat time) and ``<id>.route`` (arc line numbers),
    searched recursively under ``src``.  Ids are zero-based line numbers.
    """
    tracks = sorted(src.rglob("*.track"))
    if not tracks:
        raise InputError(f"{src}: no *.track files")
    for tp in tracks:
        stem = tp.with_suffix("")
        tid = tp.stem
        parts = {ext: stem.with_suffix(ext) for ext in (".nodes", ".arcs", ".route")}
        for p in parts.values():
            if not p.exists():
                raise InputError(f"{tp}: missing {p.name}")
        nodes = _read_rows(parts[".nodes"], 2)
        arcs = _read_rows(parts[".arcs"], 2)
        doc = {"nodes": [{"id": i, "lat": lat, "lon": lon} for i, (lon, lat) in enumerate(nodes)],
               "edges": [{"id": i, "from": int(a), "to": int(b)} for i, (a, b) in enumerate(arcs)]}
        net = network_from_dict(doc)
        ms = []
        for lon, lat, t in _read_rows(tp, 3):
            if ms and t <= ms[-1].time:
                log.warning("%s: dropping measurement at non-increasing time %g", tp.name, t)
                continue
            ms.append(Measurement(GeoPoint(lat, lon), t))
        tr = Trace(ms)
        gt = [int(r[0]) for r in _read_rows(parts[".route"], 1)]
        bad = [e for e in gt if e not in net.edges]
        if bad:
            raise InputError(f"{parts['.route']}: unknown arcs {bad[:5]}")
        save_dataset([BenchmarkItem(tid, net, tr, gt)], out, shared_network=False)
    return len(tracks)


def cmd_convert(args) -> int:
    src, out = Path(args.input), Path(args.out_dir)
    if not src.exists():
        raise InputError(f"{src}: no such file or directory")
    if args.format == "csv":
        tr = read_csv_trace(src)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        dst = out / "traces" / f"{src.stem}.json"
        save_trace(tr, dst)
        load_trace(dst)
        print(f"wrote {dst}")
    else:
        n = convert_zenodo(src, out)
        load_dataset(out)
        print(f"converted {n} trace(s) to {out}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gsmm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="match one trace")
    p.add_argument("network", help="canonical network JSON")
    p.add_argument("trace", help="canonical trace JSON")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="gsmm")
    p.add_argument("--alpha", type=float, default=GsmmConfig.alpha)
    p.add_argument("--beta", type=float, default=GsmmConfig.beta)
    p.add_argument("--sigma", type=float, default=HmmConfig.sigma, help="HMM measurement noise (m)")
    p.add_argument("--out", help="edge-id list JSON; a .geojson of the path is written beside it")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("benchmark", help="run the sampling-period sweep")
    p.add_argument("dataset", nargs="?", help="dataset directory; synthetic if omitted")
    p.add_argument("--periods", type=_floats, default=list(PERIOD_LADDER),
                   help="comma-separated seconds (default: the 11-step ladder)")
    p.add_argument("--algorithms", type=_algs, default=["gsmm", "hmm"],
                   help="comma-separated subset of " + ",".join(ALGORITHMS))
    p.add_argument("--seed", type=int, default=12345, help="seed of the synthetic dataset")
    p.add_argument("--traces", type=int, default=20, help="synthetic trace count")
    p.add_argument("--noise", type=float, default=5.0, help="synthetic noise sigma (m)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (timings skew above 1)")
    p.add_argument("--out-dir", default="benchmark-out")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("synth", help="write a synthetic grid dataset")
    p.add_argument("--rows", type=int, default=10)
    p.add_argument("--cols", type=int, default=10)
    p.add_argument("--block", type=float, default=100.0)
    p.add_argument("--route-len", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--period", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="convert external data to canonical files")
    p.add_argument("input")
    p.add_argument("--format", choices=("zenodo", "csv"), required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_convert)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MatchFailure as exc:
        print(f"error: no match, failed at measurement {exc.index}: {exc}", file=sys.stderr)
        return EXIT_NO_MATCH
    except MatchError as exc:
        print(f"error: no match: {exc}", file=sys.stderr)
        return EXIT_NO_MATCH
    except (InputError, NetworkError, TraceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
