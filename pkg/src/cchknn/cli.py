"""Command-line front end.

Subcommands follow the phases: ``preprocess`` (partition + contraction),
``customize`` (metric), ``knn`` (selection + queries), ``bench`` (ball/POI
benchmark), ``gen-demand`` (radiation model trips) and ``ingest-grid``
(population raster to per-vertex counts).

Exit codes: 0 success, 1 usage, 2 input error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import shutil
import struct
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cchknn import cch as cch_mod
from cchknn.baselines import bcch_query, bcch_select, ine_query, ine_select
from cchknn.cch import CCH, InvariantError, cch_from_bytes, cch_to_bytes, contract, customize
from cchknn.demand import DemandModel, generate_demand, make_rng
from cchknn.graph import INF, ParseError, dijkstra_ball, largest_scc, read_coordinates, read_graph
from cchknn.knn import build_target_index, entry_offsets, knn_query
from cchknn.network import Network, graph_in_rank_order
from cchknn.partition import build_sep_decomposition, tree_from_bytes, tree_to_bytes

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INVARIANT = 3

ALGORITHMS = ("cch", "bcch", "ine")


class InputError(Exception):
    """Bad or unreadable input; the message names the offending file."""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- file helpers --------------------------------------------------------------------


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from None


def _load(path, loader):
    """Run ``loader(path)`` and turn any parse failure into an InputError naming the file."""
    try:
        return loader(path)
    except InputError:
        raise
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from None
    except ParseError as e:
        raise InputError(f"{path}: {e}") from None
    except (ValueError, struct.error, IndexError) as e:
        raise InputError(f"{path}: {e}") from None


def tree_path(cch_path) -> Path:
    return Path(cch_path).with_suffix(".sdt")


def _read_cch(path) -> tuple[CCH, np.ndarray]:
    return _load(path, lambda p: cch_from_bytes(_read_bytes(p)))


def _read_tree(path):
    return _load(path, lambda p: tree_from_bytes(_read_bytes(p)))


def _read_int_column(path, name: str) -> np.ndarray:
    """One nonnegative integer per line (blank lines and '#' comments skipped)."""
    def parse(p):
        text = _read_bytes(p).decode("ascii", errors="replace")
        values = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                v = int(line)
            except ValueError:
                raise ValueError(f"line {lineno}: expected an integer {name}, got {line!r}") from None
            if v < 0:
                raise ValueError(f"line {lineno}: negative {name}")
            values.append(v)
        return np.array(values, dtype=np.int64)
    return _load(path, parse)


def read_population(path, num_vertices: int) -> np.ndarray:
    """CSV ``vertex_id,count`` in rank ids; repeated ids accumulate."""
    def parse(p):
        text = _read_bytes(p).decode("ascii", errors="replace")
        pop = np.zeros(num_vertices, dtype=np.int64)
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].strip() == "vertex_id":
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected 'vertex_id,count'")
            try:
                v, c = int(row[0]), int(row[1])
            except ValueError:
                raise ValueError(f"line {lineno}: non-integer field") from None
            if not 0 <= v < num_vertices:
                raise ValueError(f"line {lineno}: vertex {v} out of range")
            if c < 0:
                raise ValueError(f"line {lineno}: negative count")
            pop[v] += c
        return pop
    return _load(path, parse)


def load_network(cch_path, graph_path) -> Network:
    """Customized CCH, its tree (sibling .sdt file) and the metric graph in rank ids."""
    h, rank = _read_cch(cch_path)
    tree = _read_tree(tree_path(cch_path))
    if h.num_edges and np.all(h.up_weight == INF) and np.all(h.down_weight == INF):
        raise InputError(f"{cch_path}: hierarchy is not customized, run 'customize' first")
    if int(tree.last_vertex[-1]) + 1 != h.num_vertices:
        raise InputError(f"{tree_path(cch_path)}: tree does not match {cch_path}")
    g = _load(graph_path, read_graph)
    try:
        pg = graph_in_rank_order(g, rank)
    except ValueError as e:
        raise InputError(f"{graph_path}: {e}") from None
    return Network(pg, None, tree, h, entry_offsets(h, tree, pg), rank)


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", newline="")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# --- preprocess / customize --------------------------------------------------------------


def cmd_preprocess(args) -> int:
    g = _load(args.graph, read_graph)
    c = _load(args.coords, read_coordinates)
    if len(c) != g.num_vertices:
        raise InputError(f"{args.coords}: {len(c)} coordinates for {g.num_vertices} vertices")
    t0 = time.perf_counter()
    sg, sc, old_ids = largest_scc(g, c)
    tree, order, pg, _ = build_sep_decomposition(sg, sc, args.leaf_threshold, args.balance)
    t1 = time.perf_counter()
    h = contract(pg)
    t2 = time.perf_counter()
    rank = np.full(g.num_vertices, -1, dtype=np.int64)
    rank[old_ids] = order.rank
    out = Path(args.out)
    out.with_suffix(".cch").write_bytes(cch_to_bytes(h, rank))
    out.with_suffix(".sdt").write_bytes(tree_to_bytes(tree))
    _log(f"vertices {g.num_vertices} kept {sg.num_vertices} tree nodes {tree.num_nodes} "
         f"shortcuts {h.num_edges} partition {t1 - t0:.3f}s contraction {t2 - t1:.3f}s")
    return EXIT_OK


def cmd_customize(args) -> int:
    h, rank = _read_cch(args.cch)
    src_tree = tree_path(args.cch)
    _read_tree(src_tree)  # validate before copying
    g = _load(args.graph, read_graph)
    try:
        pg = graph_in_rank_order(g, rank)
    except ValueError as e:
        raise InputError(f"{args.graph}: {e}") from None
    if pg.num_vertices != h.num_vertices:
        raise InputError(f"{args.graph}: vertex count does not match {args.cch}")
    t0 = time.perf_counter()
    try:
        hc = customize(h, pg)
    except ValueError as e:
        raise InputError(f"{args.graph}: {e}") from None
    dt = time.perf_counter() - t0
    out = Path(args.out).with_suffix(".cch")
    out.write_bytes(cch_to_bytes(hc, rank))
    if tree_path(out).resolve() != src_tree.resolve():
        shutil.copyfile(src_tree, tree_path(out))
    _log(f"customization {dt * 1e3:.3f} ms")
    return EXIT_OK


# --- k-NN ----------------------------------------------------------------------------------


class _Engine:
    """Uniform selection/query interface over the three algorithms."""

    def __init__(self, net: Network, algorithm: str, recursion_threshold: int, dist_mode: str):
        self.net = net
        self.algorithm = algorithm
        self.threshold = recursion_threshold
        self.mode = dist_mode
        self.ctx = net.context()

    def select(self, targets):
        n = self.net.num_vertices
        if self.algorithm == "cch":
            return build_target_index(targets, n)
        if self.algorithm == "bcch":
            return bcch_select(self.net.cch, targets)
        mask = ine_select(n, targets)
        return mask, int(mask.sum())

    def query(self, sel, s: int, k: int):
        net = self.net
        if self.algorithm == "cch":
            return knn_query(self.ctx, net.cch, net.tree, sel, s, k,
                             recursion_threshold=self.threshold, mode=self.mode,
                             offsets=net.offsets)
        if self.algorithm == "bcch":
            return bcch_query(self.ctx, net.cch, sel, s, k)
        mask, count = sel
        return ine_query(net.graph, mask, s, k, count)

    @staticmethod
    def nbytes(sel) -> int:
        if isinstance(sel, tuple):
            return int(sel[0].nbytes)
        return int(sel.nbytes)


def _parse_sources(spec: str) -> np.ndarray:
    if spec.startswith("@"):
        return _read_int_column(spec[1:], "source")
    try:
        return np.array([int(s) for s in spec.split(",") if s.strip()], dtype=np.int64)
    except ValueError:
        raise UsageError(f"--sources: expected comma-separated vertex ids or @file, got {spec!r}") from None


def _to_rank(net: Network, ids, path) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if np.any(ids >= len(net.rank)):
        raise InputError(f"{path}: vertex id out of range")
    r = net.rank[ids]
    if np.any(r < 0):
        bad = int(ids[np.flatnonzero(r < 0)[0]])
        raise InputError(f"{path}: vertex {bad} lies outside the largest strongly connected component")
    return r


def cmd_knn(args) -> int:
    net = load_network(args.cch, args.graph)
    pois = _to_rank(net, _read_int_column(args.poi, "POI"), args.poi)
    if len(pois) == 0:
        raise InputError(f"{args.poi}: no POIs")
    sources = _to_rank(net, _parse_sources(args.sources), "--sources")
    engine = _Engine(net, args.algorithm, args.recursion_threshold, args.dist_mode)
    sel_time = 0.0
    query_time = 0.0
    nbytes = 0
    rows = []
    sel = None
    if args.mode == "offline":
        t0 = time.perf_counter()
        sel = engine.select(pois)
        sel_time += time.perf_counter() - t0
        nbytes = engine.nbytes(sel)
    for s in sources.tolist():
        if args.mode == "online":
            t0 = time.perf_counter()
            sel = engine.select(pois)
            sel_time += time.perf_counter() - t0
            nbytes = max(nbytes, engine.nbytes(sel))
        t0 = time.perf_counter()
        res = engine.query(sel, s, args.k)
        query_time += time.perf_counter() - t0
        src = int(net.to_original([s])[0])
        targets = net.to_original(res.targets).tolist() if len(res) else []
        for i, (t, d) in enumerate(zip(targets, res.distances), 1):
            rows.append((src, i, int(t), int(d)))
    with _open_out(args.out) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["source", "rank", "target", "distance"])
        w.writerows(rows)
    if args.timing:
        nq = max(len(sources), 1)
        nsel = 1 if args.mode == "offline" else nq
        sel_ms = sel_time * 1e3 / nsel
        query_us = query_time * 1e6 / nq
        with open(args.timing, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["algorithm", "mode", "queries", "selection_ms", "query_us", "online_ms",
                        "selection_bytes"])
            w.writerow([args.algorithm, args.mode, len(sources), f"{sel_ms:.6f}",
                        f"{query_us:.3f}", f"{sel_ms + query_us / 1e3:.6f}", nbytes])
    return EXIT_OK


# --- benchmark -------------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkSpec:
    ball_size: int
    poi_count: int
    k: int = 4
    num_poi_sets: int = 100
    num_sources_per_set: int = 100
    seed: int = 0

    def validate(self, num_vertices: int) -> None:
        if not 1 <= self.poi_count <= self.ball_size <= num_vertices:
            raise UsageError(f"need 1 <= |P| ({self.poi_count}) <= |B| ({self.ball_size}) "
                             f"<= |V| ({num_vertices})")
        if self.k < 1 or self.num_poi_sets < 1 or self.num_sources_per_set < 1:
            raise UsageError("k, POI sets and sources per set must be positive")


BENCH_COLUMNS = ["algorithm", "ball_size", "poi_count", "k", "queries",
                 "selection_ms", "selection_ms_min", "selection_ms_max",
                 "query_us", "query_us_min", "query_us_max", "online_ms", "selection_bytes",
                 "checksum"]


def run_bench(net: Network, spec: BenchmarkSpec, algorithms, recursion_threshold: int = 8,
              dist_mode: str = "lower_bound") -> list[dict]:
    """Ball/POI benchmark. Loops are nested (POI set, source); every query's
    distances are compared across algorithms and a mismatch raises InvariantError."""
    n = net.num_vertices
    spec.validate(n)
    rng = make_rng(spec.seed)
    engines = {a: _Engine(net, a, recursion_threshold, dist_mode) for a in algorithms}
    sel_ms = {a: [] for a in algorithms}
    query_us = {a: [] for a in algorithms}
    nbytes = {a: [] for a in algorithms}
    digest = {a: hashlib.sha256() for a in algorithms}
    for _ in range(spec.num_poi_sets):
        center = int(rng.integers(0, n))
        ball = dijkstra_ball(net.graph, center, spec.ball_size)
        pois = rng.choice(ball, size=spec.poi_count, replace=False)
        sources = rng.integers(0, n, size=spec.num_sources_per_set)
        sels = {}
        for a, eng in engines.items():
            t0 = time.perf_counter()
            sels[a] = eng.select(pois)
            sel_ms[a].append((time.perf_counter() - t0) * 1e3)
            nbytes[a].append(eng.nbytes(sels[a]))
        for s in sources.tolist():
            reference = None
            for a, eng in engines.items():
                t0 = time.perf_counter()
                res = eng.query(sels[a], s, spec.k)
                query_us[a].append((time.perf_counter() - t0) * 1e6)
                dist = np.asarray(res.distances, dtype=np.int64)
                digest[a].update(dist.tobytes())
                if reference is None:
                    reference = dist
                elif not np.array_equal(reference, dist):
                    raise InvariantError(f"algorithms disagree on source {s}: "
                                         f"{reference.tolist()} vs {dist.tolist()} ({a})")
    rows = []
    for a in algorithms:
        s_ms, q_us = np.array(sel_ms[a]), np.array(query_us[a])
        rows.append({
            "algorithm": a, "ball_size": spec.ball_size, "poi_count": spec.poi_count,
            "k": spec.k, "queries": len(q_us),
            "selection_ms": s_ms.mean(), "selection_ms_min": s_ms.min(),
            "selection_ms_max": s_ms.max(),
            "query_us": q_us.mean(), "query_us_min": q_us.min(), "query_us_max": q_us.max(),
            "online_ms": s_ms.mean() + q_us.mean() / 1e3,
            "selection_bytes": int(np.mean(nbytes[a])),
            "checksum": digest[a].hexdigest()[:16],
        })
    return rows


def write_bench_csv(rows, f) -> None:
    w = csv.DictWriter(f, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})


def cmd_bench(args) -> int:
    net = load_network(args.cch, args.graph)
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for a in algorithms:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
    if not algorithms:
        raise UsageError("no algorithms given")
    spec = BenchmarkSpec(args.ball_size, args.poi_count, args.k, args.poi_sets,
                         args.sources_per_set, args.seed)
    rows = run_bench(net, spec, algorithms, args.recursion_threshold, args.dist_mode)
    with _open_out(args.out) as f:
        write_bench_csv(rows, f)
    return EXIT_OK


# --- demand ----------------------------------------------------------------------------------


def cmd_gen_demand(args) -> int:
    net = load_network(args.cch, args.graph)
    pop = read_population(args.population, net.num_vertices)
    if pop.sum() == 0 and args.trips > 0:
        raise InputError(f"{args.population}: total population is zero")
    if not 0.0 <= args.lam < 1.0:
        raise UsageError("--lambda must lie in [0, 1)")
    if args.trips < 0:
        raise UsageError("--trips must be nonnegative")
    model = DemandModel(pop, args.lam, args.exclude_origin)
    rng = make_rng(args.seed)
    t0 = time.perf_counter()
    demand = generate_demand(model, net, args.algorithm, args.trips, rng,
                             args.recursion_threshold, args.dist_mode)
    dt = time.perf_counter() - t0
    with _open_out(args.out) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["origin", "destination", "distance"])
        w.writerows(zip(demand.origins.tolist(), demand.destinations.tolist(),
                        demand.distances.tolist()))
    if args.aggregate:
        with open(args.aggregate, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["origin", "destination", "count"])
            for (o, d), c in sorted(demand.counts().items()):
                w.writerow([o, d, c])
    per_trip_us = dt * 1e6 / args.trips if args.trips else 0.0
    mean_len = float(demand.distances.mean()) if args.trips else 0.0
    report = (f"algorithm,trips,lambda,per_trip_us,mean_trip_length\n"
              f"{args.algorithm},{args.trips},{args.lam},{per_trip_us:.3f},{mean_len:.3f}\n")
    if args.timing:
        Path(args.timing).write_text(report)
    else:
        sys.stderr.write(report)
    return EXIT_OK


# --- population grid -------------------------------------------------------------------------

_M_PER_DEG_LAT = 110_574.0
_M_PER_DEG_LON_EQUATOR = 111_320.0


def _project(lat, lon, lat0):
    """Equirectangular projection in meters around latitude ``lat0``."""
    y = np.asarray(lat, dtype=float) * _M_PER_DEG_LAT
    x = np.asarray(lon, dtype=float) * _M_PER_DEG_LON_EQUATOR * math.cos(math.radians(lat0))
    return x, y


def read_grid(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSV rows ``lat,lon,count`` (cell centers in degrees); optional header."""
    def parse(p):
        text = _read_bytes(p).decode("ascii", errors="replace")
        lat, lon, cnt = [], [], []
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].strip() == "lat":
                continue
            if len(row) != 3:
                raise ValueError(f"line {lineno}: expected 'lat,lon,count'")
            try:
                a, b, c = float(row[0]), float(row[1]), int(row[2])
            except ValueError:
                raise ValueError(f"line {lineno}: malformed field") from None
            if c < 0:
                raise ValueError(f"line {lineno}: negative count")
            lat.append(a)
            lon.append(b)
            cnt.append(c)
        return np.array(lat), np.array(lon), np.array(cnt, dtype=np.int64)
    return _load(path, parse)


def ingest_population_grid(vertex_lat, vertex_lon, cell_lat, cell_lon, cell_count,
                           cell_size: float, rng: np.random.Generator):
    """Assign each inhabitant of a cell to a uniformly random vertex inside the
    cell. Returns (population per vertex, dropped inhabitants).

    Cells are the squares ``[i*s, (i+1)*s) x [j*s, (j+1)*s)`` of a local
    equirectangular projection; a grid row belongs to the cell containing its
    center point.
    """
    if cell_size <= 0:
        raise ValueError("cell size must be positive")
    n = len(vertex_lat)
    lat0 = float(np.mean(vertex_lat)) if n else 0.0
    vx, vy = _project(vertex_lat, vertex_lon, lat0)
    cx, cy = _project(cell_lat, cell_lon, lat0)
    vkey = np.stack([np.floor(vx / cell_size), np.floor(vy / cell_size)], axis=1).astype(np.int64)
    ckey = np.stack([np.floor(cx / cell_size), np.floor(cy / cell_size)], axis=1).astype(np.int64)
    members: dict[tuple[int, int], list[int]] = {}
    for v, key in enumerate(map(tuple, vkey.tolist())):
        members.setdefault(key, []).append(v)
    pop = np.zeros(n, dtype=np.int64)
    dropped = 0
    for key, count in zip(map(tuple, ckey.tolist()), cell_count.tolist()):
        verts = members.get(key)
        if not verts:
            dropped += count
            continue
        if len(verts) == 1:
            pop[verts[0]] += count
        else:
            pop[verts] += rng.multinomial(count, np.full(len(verts), 1.0 / len(verts)))
    return pop, dropped


def cmd_ingest_grid(args) -> int:
    coords = _load(args.coords, read_coordinates)
    _, rank = _read_cch(args.cch)
    if len(rank) != len(coords):
        raise InputError(f"{args.coords}: {len(coords)} coordinates, {args.cch} covers {len(rank)}")
    lat, lon, cnt = read_grid(args.grid)
    if args.cell_size <= 0:
        raise UsageError("--cell-size must be positive")
    kept = np.flatnonzero(rank >= 0)
    # DIMACS coordinates are micro-degrees, x = longitude and y = latitude
    vlat = coords.y[kept] / 1e6
    vlon = coords.x[kept] / 1e6
    pop, dropped = ingest_population_grid(vlat, vlon, lat, lon, cnt, args.cell_size,
                                          make_rng(args.seed))
    out_pop = np.zeros(int(rank.max()) + 1, dtype=np.int64)
    out_pop[rank[kept]] = pop
    with _open_out(args.out) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["vertex_id", "count"])
        for v in np.flatnonzero(out_pop).tolist():
            w.writerow([v, int(out_pop[v])])
    _log(f"assigned {int(pop.sum())} inhabitants, dropped {dropped}")
    return EXIT_OK


# --- entry point -----------------------------------------------------------------------------


def _add_global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    """Global flags work before or after the subcommand; the subcommand copies
    suppress their defaults so they do not clobber values given earlier."""
    def d(value):
        return argparse.SUPPRESS if suppress else value
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--threads", type=int, default=d(1),
                   help="accepted for compatibility; work runs on one thread")
    p.add_argument("--recursion-threshold", type=int, default=d(8))
    p.add_argument("--dist-mode", choices=["lower-bound", "exact"], default=d("lower-bound"))
    p.add_argument("--debug", action="store_true", default=d(False),
                   help="audit search labels after every query")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _add_global_flags(common, suppress=True)

    p = _Parser(prog="cchknn", description=__doc__.split("\n")[0])
    _add_global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("preprocess", parents=[common], help="nested dissection and contraction")
    s.add_argument("--graph", required=True, help="DIMACS .gr file")
    s.add_argument("--coords", required=True, help="DIMACS .co file")
    s.add_argument("--out", required=True, help="output prefix; writes PREFIX.cch and PREFIX.sdt")
    s.add_argument("--leaf-threshold", type=int, default=32)
    s.add_argument("--balance", type=float, default=0.3)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("customize", parents=[common], help="apply a metric")
    s.add_argument("--cch", required=True)
    s.add_argument("--graph", required=True, help="DIMACS .gr file with the metric")
    s.add_argument("--out", required=True, help="output .cch (tree copied next to it)")
    s.set_defaults(func=cmd_customize)

    s = sub.add_parser("knn", parents=[common], help="k-nearest POI queries")
    s.add_argument("--cch", required=True, help="customized .cch (tree read from the .sdt sibling)")
    s.add_argument("--graph", required=True)
    s.add_argument("--poi", required=True, help="one original vertex id per line")
    s.add_argument("--sources", required=True, help="comma-separated original ids or @file")
    s.add_argument("-k", "--k", type=int, default=4)
    s.add_argument("--algorithm", choices=ALGORITHMS, default="cch")
    s.add_argument("--mode", choices=["online", "offline"], default="online")
    s.add_argument("--out", default="-")
    s.add_argument("--timing", help="CSV timing report")
    s.set_defaults(func=cmd_knn)

    s = sub.add_parser("bench", parents=[common], help="ball/POI benchmark")
    s.add_argument("--cch", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--ball-size", type=int, required=True)
    s.add_argument("--poi-count", type=int, required=True)
    s.add_argument("-k", "--k", type=int, default=4)
    s.add_argument("--poi-sets", type=int, default=100)
    s.add_argument("--sources-per-set", type=int, default=100)
    s.add_argument("--algorithms", default="cch,bcch,ine")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("gen-demand", parents=[common], help="radiation model trips")
    s.add_argument("--cch", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--population", required=True, help="CSV vertex_id,count in rank ids")
    s.add_argument("--lambda", dest="lam", type=float, default=0.0)
    s.add_argument("--trips", type=int, required=True)
    s.add_argument("--algorithm", choices=["crad", "drad"], default="crad")
    s.add_argument("--exclude-origin", action="store_true")
    s.add_argument("--out", default="-")
    s.add_argument("--aggregate", help="CSV origin,destination,count")
    s.add_argument("--timing", help="CSV timing report (default: stderr)")
    s.set_defaults(func=cmd_gen_demand)

    s = sub.add_parser("ingest-grid", parents=[common], help="population raster to vertex counts")
    s.add_argument("--coords", required=True)
    s.add_argument("--cch", required=True, help="preprocessed .cch supplying the rank ids")
    s.add_argument("--grid", required=True, help="CSV lat,lon,count")
    s.add_argument("--cell-size", type=float, default=1000.0, help="cell side in meters")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_ingest_grid)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.dist_mode = args.dist_mode.replace("-", "_")
    previous = cch_mod.DEBUG
    if args.debug:
        cch_mod.set_debug(True)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"cchknn: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as e:
        print(f"cchknn: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantError, AssertionError) as e:
        print(f"cchknn: invariant failure: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    finally:
        cch_mod.set_debug(previous)


if __name__ == "__main__":
    sys.exit(main())
