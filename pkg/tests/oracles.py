"""Independent reference implementations used as test oracles."""

import itertools
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as sp_dijkstra

from cchknn.graph import INF, Graph


def bellman_ford(g: Graph, s: int) -> np.ndarray:
    """Edge-list relaxation until fixpoint; INF marks unreachable vertices."""
    n = g.num_vertices
    dist = np.full(n, INF, dtype=np.int64)
    dist[s] = 0
    tails, heads, w = g.tails(), g.head, g.weight
    for _ in range(n):
        cand = np.where(dist[tails] < INF, dist[tails] + w, INF)
        new = dist.copy()
        np.minimum.at(new, heads, cand)
        if np.array_equal(new, dist):
            break
        dist = new
    return dist


def scipy_distances(g: Graph, sources) -> np.ndarray:
    """Distance rows from each source using scipy's Dijkstra (INF if unreachable).

    Zero-length arcs are stored as tiny positive values so scipy keeps them; the
    rounded result is exact for integer lengths.
    """
    n = g.num_vertices
    data = np.where(g.weight == 0, 1e-9, g.weight.astype(float))
    m = sp.csr_matrix((data, g.head, g.first_out), shape=(n, n))
    d = sp_dijkstra(m, directed=True, indices=np.atleast_1d(sources))
    out = np.full(d.shape, INF, dtype=np.int64)
    finite = np.isfinite(d)
    out[finite] = np.rint(d[finite]).astype(np.int64)
    return out


def boundary(g: Graph, lo: int, hi: int) -> set[int]:
    """Vertices outside [lo, hi] adjacent (either direction) to a vertex inside."""
    out = set()
    tails = g.tails()
    for a, b in zip(tails.tolist(), g.head.tolist()):
        ina, inb = lo <= a <= hi, lo <= b <= hi
        if ina and not inb:
            out.add(b)
        elif inb and not ina:
            out.add(a)
    return out


def knn_brute(dist_row: np.ndarray, targets, k: int) -> list[int]:
    """Sorted distances of the k closest targets."""
    d = sorted(int(dist_row[t]) for t in set(int(t) for t in targets))
    return d[:k]


def closest_subset_law(dist_row, opportunities, osel: int) -> dict[int, float]:
    """Exact destination law of 'pick a uniform osel-subset of the opportunities,
    return the closest' by enumerating every subset. ``opportunities[v]`` is the
    count at vertex v; distances must be distinct among opportunity-bearing
    vertices so the closest is unique."""
    owners = [v for v, c in enumerate(opportunities) for _ in range(int(c))]
    law: dict[int, float] = {}
    total = comb(len(owners), osel)
    for subset in itertools.combinations(range(len(owners)), osel):
        best = min(subset, key=lambda i: dist_row[owners[i]])
        v = owners[best]
        law[v] = law.get(v, 0.0) + 1.0 / total
    return law


def min_distance_law(dist_row, opportunities, osel: int) -> dict[int, float]:
    """Exact law of the distance to the closest of a uniform osel-subset."""
    owners = [v for v, c in enumerate(opportunities) for _ in range(int(c))]
    law: dict[int, float] = {}
    total = comb(len(owners), osel)
    for subset in itertools.combinations(range(len(owners)), osel):
        d = int(min(dist_row[owners[i]] for i in subset))
        law[d] = law.get(d, 0.0) + 1.0 / total
    return law


def min_distance_law_by_counting(dist_row, opportunities, osel: int) -> dict[int, float]:
    """Same law as min_distance_law without enumeration: P(min >= d) is the chance
    that all osel picks avoid the opportunities closer than d."""
    opp = np.asarray(opportunities, dtype=np.int64)
    total = int(opp.sum())
    levels = sorted(set(int(dist_row[v]) for v in np.flatnonzero(opp)))
    law = {}
    closer = 0
    for d in levels:
        at = int(opp[np.asarray(dist_row) == d].sum())
        p = (comb(total - closer, osel) - comb(total - closer - at, osel)) / comb(total, osel)
        if p > 0:
            law[d] = p
        closer += at
    return law


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical(values) -> dict:
    vals, counts = np.unique(np.asarray(values), return_counts=True)
    n = counts.sum()
    return {int(v): c / n for v, c in zip(vals, counts)}


def mv_hypergeom_pmf(counts, n) -> dict[tuple, float]:
    """Exact multivariate hypergeometric pmf by enumerating all outcomes."""
    total = comb(sum(counts), n)
    pmf = {}
    for x in itertools.product(*(range(c + 1) for c in counts)):
        if sum(x) == n:
            p = 1
            for c, k in zip(counts, x):
                p *= comb(c, k)
            pmf[x] = p / total
    return pmf
