"""Radiation-model travel demand generation.

Two destination finders share the same origin and selectable-count sampling:

* DRAD runs Dijkstra from the origin until a geometrically drawn number of
  opportunities has been passed.
* CRAD walks the separator decomposition tree, splitting the selectable
  opportunities among children and separator with multivariate hypergeometric
  draws and pruning subgraphs that lie farther than the closest selectable
  opportunity found so far.

Opportunities equal population. They are indexed 0..N-1 in vertex (rank) order,
so those of any tree node form one contiguous index range.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numba
import numpy as np

from cchknn import cch
from cchknn.cch import (
    forward_kernel,
    labels_clean_kernel,
    maybe_audit,
    point_query_kernel,
    record_audits,
    reset_kernel,
)
from cchknn.graph import INF, Graph
from cchknn.knn import EXACT, _mode, subgraph_dist_kernel

CRAD = 0
DRAD = 1
_ALGORITHMS = {"crad": CRAD, "drad": DRAD}


def make_rng(seed: int, worker: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for ``(seed, worker)``."""
    return np.random.default_rng(np.random.SeedSequence([seed, worker]))


@dataclass(frozen=True)
class DemandModel:
    """Per-vertex population (rank ids); opportunities equal population."""

    population: np.ndarray
    lam: float = 0.0
    exclude_origin: bool = False

    def __post_init__(self):
        pop = np.asarray(self.population, dtype=np.int64)
        if pop.ndim != 1 or np.any(pop < 0):
            raise ValueError("population must be a nonnegative vector")
        if not 0.0 <= self.lam < 1.0:
            raise ValueError("lambda must lie in [0, 1)")
        object.__setattr__(self, "population", pop)
        prefix = np.zeros(len(pop) + 1, dtype=np.int64)
        np.cumsum(pop, out=prefix[1:])
        object.__setattr__(self, "prefix", prefix)

    @property
    def total(self) -> int:
        return int(self.prefix[-1])

    def opportunities(self, lo: int, hi: int) -> int:
        """Total opportunities of vertices lo..hi."""
        return int(self.prefix[hi + 1] - self.prefix[lo])


@dataclass(frozen=True)
class Trip:
    origin: int
    destination: int
    distance: int


# --- random variates -----------------------------------------------------------------


@numba.njit(cache=True)
def _log_comb(n, k):
    return math.lgamma(n + 1.0) - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0)


@numba.njit(cache=True)
def hypergeom_kernel(rng, ngood, nbad, nsample):
    """Number of good items among ``nsample`` drawn without replacement.

    Inversion on the exact pmf, walking outward from the mode so the expected
    cost is proportional to the standard deviation.
    """
    lo = max(0, nsample - nbad)
    hi = min(nsample, ngood)
    if lo >= hi:
        return lo
    total = ngood + nbad
    mode = ((nsample + 1) * (ngood + 1)) // (total + 2)
    mode = min(max(mode, lo), hi)
    pm = math.exp(_log_comb(ngood, mode) + _log_comb(nbad, nsample - mode) - _log_comb(total, nsample))
    u = rng.random() - pm
    if u < 0.0:
        return mode
    up = mode
    dn = mode
    pu = pm
    pd = pm
    while up < hi or dn > lo:
        if up < hi:
            pu *= (ngood - up) * (nsample - up) / ((up + 1.0) * (nbad - nsample + up + 1.0))
            up += 1
            u -= pu
            if u < 0.0:
                return up
        if dn > lo:
            pd *= dn * (nbad - nsample + dn) / ((ngood - dn + 1.0) * (nsample - dn + 1.0))
            dn -= 1
            u -= pd
            if u < 0.0:
                return dn
    # only reachable through floating point round-off in the tail
    return mode


@numba.njit(cache=True)
def mv_hypergeom_kernel(rng, n, counts, out):
    """Chain of univariate draws, each conditioned on what is left."""
    remaining_total = 0
    for c in counts:
        remaining_total += c
    rem = n
    last = len(counts) - 1
    for i in range(last):
        if rem == 0:
            out[i] = 0
        else:
            x = hypergeom_kernel(rng, counts[i], remaining_total - counts[i], rem)
            out[i] = x
            rem -= x
        remaining_total -= counts[i]
    out[last] = rem


def hypergeom(ngood: int, nbad: int, nsample: int, rng: np.random.Generator) -> int:
    if min(ngood, nbad, nsample) < 0 or nsample > ngood + nbad:
        raise ValueError("invalid hypergeometric parameters")
    return int(hypergeom_kernel(rng, ngood, nbad, nsample))


def mv_hypergeom(n: int, counts, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` balls without replacement from an urn with ``counts[i]`` balls of
    color ``i``; returns the per-color draw counts."""
    counts = np.asarray(counts, dtype=np.int64)
    if n < 0 or np.any(counts < 0):
        raise ValueError("negative draw count or category size")
    if n > counts.sum():
        raise ValueError("more draws than balls")
    out = np.empty(len(counts), dtype=np.int64)
    mv_hypergeom_kernel(rng, n, counts, out)
    if out.sum() != n or np.any(out > counts):
        raise AssertionError("draws not conserved")
    return out


@numba.njit(cache=True)
def sample_origin_kernel(rng, prefix):
    u = rng.integers(0, prefix[-1])
    return np.searchsorted(prefix, u, side="right") - 1


@numba.njit(cache=True)
def sample_num_selectable_kernel(rng, total, lam):
    # O_sel = 0 has no destination; rejecting it keeps the conditional law
    while True:
        fit = rng.integers(0, total + 1)
        if fit == 0:
            continue
        sel = fit if lam == 0.0 else rng.binomial(fit, 1.0 - lam)
        if sel >= 1:
            return sel


def sample_origin(model: DemandModel, rng: np.random.Generator) -> int:
    """Origin drawn with probability proportional to population."""
    if model.total <= 0:
        raise ValueError("zero total population")
    return int(sample_origin_kernel(rng, model.prefix))


def sample_num_selectable(model: DemandModel, rng: np.random.Generator, origin: int = -1) -> int:
    total = _effective_total(model, origin)
    if total <= 0:
        raise ValueError("no opportunities")
    return int(sample_num_selectable_kernel(rng, total, model.lam))


def _effective_total(model: DemandModel, origin: int) -> int:
    if model.exclude_origin and origin >= 0:
        return model.total - int(model.population[origin])
    return model.total


# --- DRAD ------------------------------------------------------------------------------


@numba.njit(cache=True)
def drad_kernel(rng, first_out, head, weight, opp, total, origin, osel, excl,
                dist, touched, inf):
    p = (osel + 1.0) / (total + 1.0)
    if p >= 1.0:
        interior = 0
    else:
        interior = rng.geometric(p) - 1
        if interior > total - osel:
            interior = total - osel
    need = interior + 1
    count = 0
    n_touched = 1
    touched[0] = origin
    dist[origin] = 0
    queue = [(np.int64(0), np.int64(origin))]
    dest = -1
    dd = inf
    while queue:
        d, v = heapq.heappop(queue)
        if d > dist[v]:
            continue
        if not (excl and v == origin):
            count += opp[v]
        if count >= need:
            dest = v
            dd = d
            break
        for i in range(first_out[v], first_out[v + 1]):
            w = head[i]
            nd = d + weight[i]
            if nd < dist[w]:
                if dist[w] == inf:
                    touched[n_touched] = w
                    n_touched += 1
                dist[w] = nd
                heapq.heappush(queue, (nd, w))
    for i in range(n_touched):
        dist[touched[i]] = inf
    if dest == -1:
        raise AssertionError("graph exhausted before enough opportunities were visited")
    return dest, dd


class DradScratch:
    def __init__(self, n: int):
        self.dist = np.full(n, INF, dtype=np.int64)
        self.touched = np.empty(n, dtype=np.int64)


def drad_trip(model: DemandModel, g: Graph, origin: int, osel: int,
              rng: np.random.Generator, scratch: DradScratch | None = None) -> Trip:
    if osel < 1:
        raise ValueError("need at least one selectable opportunity")
    scratch = scratch or DradScratch(g.num_vertices)
    total = _effective_total(model, origin)
    dest, d = drad_kernel(rng, g.first_out, g.head, g.weight, model.population, total,
                          origin, osel, model.exclude_origin, scratch.dist, scratch.touched, INF)
    if cch.DEBUG:
        record_audits(1, int(np.any(scratch.dist != INF)))
    return Trip(origin, int(dest), int(d))


# --- CRAD ------------------------------------------------------------------------------


@numba.njit(cache=True)
def _range_total(prefix, lo, hi, excl_v, excl_n):
    t = prefix[hi + 1] - prefix[lo]
    if lo <= excl_v <= hi:
        t -= excl_n
    return t


@numba.njit(cache=True)
def _floyd(rng, m, size):
    """``m`` distinct integers drawn uniformly from ``[0, size)``."""
    chosen = {np.int64(0)}
    chosen.clear()
    for j in range(size - m, size):
        t = rng.integers(0, j + 1)
        if t in chosen:
            chosen.add(j)
        else:
            chosen.add(t)
    out = np.empty(m, dtype=np.int64)
    i = 0
    for t in chosen:
        out[i] = t
        i += 1
    return out


@numba.njit(cache=True)
def _sample_range(rng, prefix, opp, lo, hi, m, excl_v, excl_n,
                  up_first, up_head, down_w, parent, fwd, rev, best_v, best_d, inf):
    """Sample ``m`` distinct selectable opportunities among vertices lo..hi and fold
    the closest into (best_v, best_d). Returns (best_v, best_d, searches)."""
    if m <= 0:
        return best_v, best_d, 0
    nverts = hi - lo + 1
    searches = 0
    if m > nverts:
        # many draws: split per vertex instead of per opportunity
        rem = m
        left = _range_total(prefix, lo, hi, excl_v, excl_n)
        for v in range(lo, hi + 1):
            if rem == 0:
                break
            c = opp[v]
            if v == excl_v:
                c -= excl_n
            x = hypergeom_kernel(rng, c, left - c, rem) if c > 0 else 0
            rem -= x
            left -= c
            if x > 0:
                d = point_query_kernel(up_first, up_head, down_w, parent, fwd, rev, v, inf)
                searches += 1
                if d < best_d:
                    best_d = d
                    best_v = v
        return best_v, best_d, searches
    size = _range_total(prefix, lo, hi, excl_v, excl_n)
    idx = _floyd(rng, m, size)
    base = prefix[lo]
    skip_from = prefix[excl_v] if lo <= excl_v <= hi else np.int64(-1)
    verts = np.empty(m, dtype=np.int64)
    for i in range(m):
        gi = base + idx[i]
        if skip_from >= 0 and gi >= skip_from:
            gi += excl_n
        verts[i] = np.searchsorted(prefix, gi, side="right") - 1
    verts.sort()
    for i in range(m):
        v = verts[i]
        if i > 0 and verts[i - 1] == v:
            continue
        d = point_query_kernel(up_first, up_head, down_w, parent, fwd, rev, v, inf)
        searches += 1
        if d < best_d:
            best_d = d
            best_v = v
    return best_v, best_d, searches


@numba.njit(cache=True)
def crad_kernel(rng, up_first, up_head, up_w, down_w, parent,
                child_first, children, first_vertex, last_vertex, first_sep,
                prefix, opp, offsets, fwd, rev, origin, osel, threshold, exact,
                excl, pruned, inf):
    """Closest of ``osel`` uniformly chosen opportunities. Returns
    (destination, distance, reverse searches, pruned nodes). Pruned nodes are
    recorded as (node, distance bound, share) rows while ``pruned`` has room."""
    excl_v = origin if excl else -1
    excl_n = opp[origin] if excl else 0
    forward_kernel(up_first, up_head, up_w, parent, fwd, origin, inf)
    best_v = -1
    best_d = inf
    searches = 0
    n_pruned = 0
    root = len(first_vertex) - 1
    stack = [(np.int64(root), np.int64(osel), np.int64(0))]
    while stack:
        x, ox, dx = stack.pop()
        if dx >= best_d:
            if n_pruned < len(pruned):
                pruned[n_pruned, 0] = x
                pruned[n_pruned, 1] = dx
                pruned[n_pruned, 2] = ox
            n_pruned += 1
            continue
        lo, hi = first_vertex[x], last_vertex[x]
        c0, c1 = child_first[x], child_first[x + 1]
        if ox < threshold or c0 == c1:
            best_v, best_d, s = _sample_range(rng, prefix, opp, lo, hi, ox, excl_v, excl_n,
                                              up_first, up_head, down_w, parent, fwd, rev,
                                              best_v, best_d, inf)
            searches += s
            continue
        nc = c1 - c0
        counts = np.empty(nc + 1, dtype=np.int64)
        for j in range(nc):
            y = children[c0 + j]
            counts[j] = _range_total(prefix, first_vertex[y], last_vertex[y], excl_v, excl_n)
        fs = first_sep[x]
        counts[nc] = _range_total(prefix, fs, hi, excl_v, excl_n)
        shares = np.empty(nc + 1, dtype=np.int64)
        mv_hypergeom_kernel(rng, ox, counts, shares)
        if shares.sum() != ox:
            raise AssertionError("selectable opportunities not conserved")
        best_v, best_d, s = _sample_range(rng, prefix, opp, fs, hi, shares[nc], excl_v, excl_n,
                                          up_first, up_head, down_w, parent, fwd, rev,
                                          best_v, best_d, inf)
        searches += s
        cand = np.empty(nc, dtype=np.int64)
        cshare = np.empty(nc, dtype=np.int64)
        cdist = np.empty(nc, dtype=np.int64)
        k = 0
        for j in range(nc):
            if shares[j] == 0:
                continue
            y = children[c0 + j]
            ylo, yhi = first_vertex[y], last_vertex[y]
            if ylo <= origin <= yhi:
                d = 0
            else:
                d = subgraph_dist_kernel(up_first, up_head, down_w, parent, fwd, rev,
                                         offsets, yhi, exact, inf)
                searches += 1
            cand[k] = y
            cshare[k] = shares[j]
            cdist[k] = d
            k += 1
        order = np.argsort(cdist[:k], kind="mergesort")
        for j in range(k - 1, -1, -1):
            i = order[j]
            stack.append((cand[i], cshare[i], cdist[i]))
    reset_kernel(parent, fwd, origin, inf)
    if best_v == -1:
        raise AssertionError("no selectable opportunity found")
    return best_v, best_d, searches, n_pruned


@dataclass
class CradResult:
    trip: Trip
    reverse_searches: int
    pruned: list[tuple[int, int, int]]  # (node, distance bound, share)


def crad_search(model: DemandModel, net, origin: int, osel: int, rng: np.random.Generator,
                ctx=None, recursion_threshold: int = 8, mode="lower_bound") -> CradResult:
    """One CRAD destination search with its work counters."""
    if osel < 1:
        raise ValueError("need at least one selectable opportunity")
    if osel > _effective_total(model, origin):
        raise ValueError("more selectable opportunities than exist")
    ctx = ctx or net.context()
    h, tree = net.cch, net.tree
    pruned = np.empty((tree.num_nodes, 3), dtype=np.int64)
    dest, d, searches, n_pruned = crad_kernel(
        rng, h.up_first, h.up_head, h.up_weight, h.down_weight, h.parent,
        tree.child_first, tree.children, tree.first_vertex, tree.last_vertex, tree.first_sep,
        model.prefix, model.population, net.offsets, ctx.forward, ctx.reverse,
        origin, osel, recursion_threshold, _mode(mode) == EXACT, model.exclude_origin,
        pruned, INF,
    )
    maybe_audit(ctx)
    rows = [tuple(r) for r in pruned[:min(n_pruned, len(pruned))].tolist()]
    return CradResult(Trip(origin, int(dest), int(d)), int(searches), rows)


def crad_trip(model: DemandModel, net, origin: int, osel: int, rng: np.random.Generator,
              ctx=None, recursion_threshold: int = 8, mode="lower_bound") -> Trip:
    """Destination of one trip via the separator decomposition tree."""
    return crad_search(model, net, origin, osel, rng, ctx, recursion_threshold, mode).trip


@numba.njit(cache=True)
def _generate_kernel(rng, algorithm, num_trips, prefix, opp, lam, excl,
                     g_first, g_head, g_weight, dist, touched,
                     up_first, up_head, up_w, down_w, parent,
                     child_first, children, first_vertex, last_vertex, first_sep,
                     offsets, fwd, rev, threshold, exact, fixed_origin, fixed_osel,
                     audit, out_o, out_d, out_len, inf):
    """Returns the number of per-trip label audits that failed."""
    total = prefix[-1]
    violations = 0
    no_trace = np.empty((0, 3), dtype=np.int64)
    for i in range(num_trips):
        origin = sample_origin_kernel(rng, prefix) if fixed_origin < 0 else fixed_origin
        eff = total - opp[origin] if excl else total
        osel = sample_num_selectable_kernel(rng, eff, lam) if fixed_osel < 1 else fixed_osel
        if algorithm == 0:
            dest, d, _, _ = crad_kernel(rng, up_first, up_head, up_w, down_w, parent,
                                        child_first, children, first_vertex, last_vertex,
                                        first_sep, prefix, opp, offsets, fwd, rev, origin,
                                        osel, threshold, exact, excl, no_trace, inf)
        else:
            dest, d = drad_kernel(rng, g_first, g_head, g_weight, opp, eff, origin, osel,
                                  excl, dist, touched, inf)
        out_o[i] = origin
        out_d[i] = dest
        out_len[i] = d
        if audit:
            clean = labels_clean_kernel(fwd, rev, inf)
            for j in range(len(dist)):
                if dist[j] != inf:
                    clean = False
                    break
            if not clean:
                violations += 1
    return violations


@dataclass
class Demand:
    origins: np.ndarray
    destinations: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.origins)

    def trips(self) -> list[Trip]:
        return [Trip(*t) for t in zip(self.origins.tolist(), self.destinations.tolist(),
                                      self.distances.tolist())]

    def counts(self) -> dict[tuple[int, int], int]:
        """Aggregated number of trips per (origin, destination) pair."""
        out: dict[tuple[int, int], int] = {}
        for o, d in zip(self.origins.tolist(), self.destinations.tolist()):
            out[(o, d)] = out.get((o, d), 0) + 1
        return out


def generate_demand(model: DemandModel, net, algorithm: str, num_trips: int,
                    rng: np.random.Generator, recursion_threshold: int = 8,
                    mode="lower_bound", origin: int = -1, osel: int = 0) -> Demand:
    """Generate ``num_trips`` trips one after another.

    ``origin`` and ``osel`` pin the origin and the number of selectable
    opportunities instead of sampling them (useful for distribution checks).
    In debug mode every trip is followed by a full label audit.
    """
    try:
        alg = _ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}") from None
    if num_trips < 0:
        raise ValueError("negative trip count")
    out_o = np.empty(num_trips, dtype=np.int64)
    out_d = np.empty(num_trips, dtype=np.int64)
    out_len = np.empty(num_trips, dtype=np.int64)
    if num_trips == 0:
        return Demand(out_o, out_d, out_len)
    if model.total <= 0:
        raise ValueError("zero total population")
    if origin >= 0 and osel > _effective_total(model, origin):
        raise ValueError("more selectable opportunities than exist")
    g, h, tree = net.graph, net.cch, net.tree
    ctx = net.context()
    scratch = DradScratch(g.num_vertices)
    violations = _generate_kernel(
        rng, alg, num_trips, model.prefix, model.population, float(model.lam),
        model.exclude_origin, g.first_out, g.head, g.weight, scratch.dist, scratch.touched,
        h.up_first, h.up_head, h.up_weight, h.down_weight, h.parent,
        tree.child_first, tree.children, tree.first_vertex, tree.last_vertex, tree.first_sep,
        net.offsets, ctx.forward, ctx.reverse, recursion_threshold, _mode(mode) == EXACT,
        origin, osel, cch.DEBUG, out_o, out_d, out_len, INF,
    )
    if cch.DEBUG:
        record_audits(num_trips, violations)
    return Demand(out_o, out_d, out_len)
