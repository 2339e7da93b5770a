"""Road graph representation, DIMACS I/O, connectivity reduction and Dijkstra."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

INF = np.iinfo(np.uint32).max
"""Sentinel for an unreachable vertex / absent edge. Lengths are 32-bit."""


class ParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Graph:
    """Directed graph in adjacency-array (CSR) form.

    Out-edges of ``v`` are ``head[first_out[v]:first_out[v + 1]]`` with lengths in
    the same slice of ``weight``; each list is sorted by head. A one-way road has no
    reverse edge.
    """

    first_out: np.ndarray
    head: np.ndarray
    weight: np.ndarray

    @property
    def num_vertices(self) -> int:
        return len(self.first_out) - 1

    @property
    def num_edges(self) -> int:
        return len(self.head)

    @classmethod
    def from_edges(cls, num_vertices: int, tails, heads, weights) -> "Graph":
        """Build from arc lists. Parallel arcs collapse to the minimum length and
        self-loops are dropped."""
        tails = np.asarray(tails, dtype=np.int64)
        heads = np.asarray(heads, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.int64)
        if len(tails) and (
            tails.min() < 0 or heads.min() < 0
            or max(tails.max(), heads.max()) >= num_vertices
        ):
            raise ValueError("edge endpoint out of range")
        if len(weights) and (weights.min() < 0 or weights.max() >= INF):
            raise ValueError("edge lengths must lie in [0, 2^32 - 1)")
        keep = tails != heads
        tails, heads, weights = tails[keep], heads[keep], weights[keep]
        order = np.lexsort((weights, heads, tails))
        tails, heads, weights = tails[order], heads[order], weights[order]
        if len(tails):
            first = np.ones(len(tails), dtype=bool)
            first[1:] = (tails[1:] != tails[:-1]) | (heads[1:] != heads[:-1])
            tails, heads, weights = tails[first], heads[first], weights[first]
        first_out = np.zeros(num_vertices + 1, dtype=np.int64)
        np.cumsum(np.bincount(tails, minlength=num_vertices), out=first_out[1:])
        return cls(first_out, heads.copy(), weights.copy())

    def tails(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_vertices, dtype=np.int64), np.diff(self.first_out))

    def out_edges(self, v: int) -> list[tuple[int, int]]:
        lo, hi = self.first_out[v], self.first_out[v + 1]
        return list(zip(self.head[lo:hi].tolist(), self.weight[lo:hi].tolist()))

    def edge_length(self, v: int, w: int) -> int:
        """Length of edge v->w, or INF if absent."""
        lo, hi = self.first_out[v], self.first_out[v + 1]
        i = lo + np.searchsorted(self.head[lo:hi], w)
        if i < hi and self.head[i] == w:
            return int(self.weight[i])
        return INF

    def edge_set(self) -> set[tuple[int, int, int]]:
        return set(zip(self.tails().tolist(), self.head.tolist(), self.weight.tolist()))

    @cached_property
    def undirected(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency of the underlying undirected graph."""
        n = self.num_vertices
        t = self.tails()
        a = sp.csr_matrix(
            (np.ones(2 * len(t), dtype=np.int8), (np.r_[t, self.head], np.r_[self.head, t])),
            shape=(n, n),
        )
        a.sum_duplicates()
        a.data[:] = 1
        return a

    def scaled(self, factor: int) -> "Graph":
        return Graph(self.first_out, self.head, self.weight * factor)


@dataclass(frozen=True)
class Coordinates:
    """Per-vertex fixed-point coordinates, degrees * 10^6 (DIMACS ``x`` = longitude,
    ``y`` = latitude)."""

    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.x)


# --- DIMACS ------------------------------------------------------------------


def _lines(text):
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii")
    return text.splitlines()


def parse_dimacs_gr(text) -> Graph:
    """Parse a 9th DIMACS Challenge ``.gr`` file (1-based ids)."""
    n = m = None
    tails, heads, weights = [], [], []
    for lineno, raw in enumerate(_lines(text), start=1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        if parts[0] == "p":
            if n is not None:
                raise ParseError("duplicate problem line", lineno)
            if len(parts) != 4 or parts[1] != "sp":
                raise ParseError("malformed header, expected 'p sp <n> <m>'", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError("malformed header, expected 'p sp <n> <m>'", lineno) from None
            if n < 0 or m < 0:
                raise ParseError("negative size in header", lineno)
        elif parts[0] == "a":
            if n is None:
                raise ParseError("arc before problem line", lineno)
            if len(parts) != 4:
                raise ParseError("malformed arc line", lineno)
            try:
                u, v, w = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError("malformed arc line", lineno) from None
            if not (1 <= u <= n and 1 <= v <= n):
                raise ParseError(f"vertex id out of range 1..{n}", lineno)
            if w < 0:
                raise ParseError("negative arc weight", lineno)
            if w >= INF:
                raise ParseError("arc weight exceeds 32 bits", lineno)
            tails.append(u - 1)
            heads.append(v - 1)
            weights.append(w)
        else:
            raise ParseError(f"unknown line type {parts[0]!r}", lineno)
    if n is None:
        raise ParseError("missing problem line")
    if len(tails) != m:
        raise ParseError(f"header announces {m} arcs, found {len(tails)}")
    return Graph.from_edges(n, tails, heads, weights)


def write_dimacs_gr(g: Graph) -> str:
    out = [f"p sp {g.num_vertices} {g.num_edges}"]
    for t, h, w in zip(g.tails().tolist(), g.head.tolist(), g.weight.tolist()):
        out.append(f"a {t + 1} {h + 1} {w}")
    return "\n".join(out) + "\n"


def parse_dimacs_co(text) -> Coordinates:
    n = None
    xs = ys = None
    seen = None
    for lineno, raw in enumerate(_lines(text), start=1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        if parts[0] == "p":
            if len(parts) != 5 or parts[1:4] != ["aux", "sp", "co"]:
                raise ParseError("malformed header, expected 'p aux sp co <n>'", lineno)
            try:
                n = int(parts[4])
            except ValueError:
                raise ParseError("malformed header", lineno) from None
            xs = np.zeros(n, dtype=np.int64)
            ys = np.zeros(n, dtype=np.int64)
            seen = np.zeros(n, dtype=bool)
        elif parts[0] == "v":
            if n is None:
                raise ParseError("vertex before problem line", lineno)
            if len(parts) != 4:
                raise ParseError("malformed vertex line", lineno)
            try:
                v, x, y = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError("malformed vertex line", lineno) from None
            if not 1 <= v <= n:
                raise ParseError(f"vertex id out of range 1..{n}", lineno)
            xs[v - 1], ys[v - 1] = x, y
            seen[v - 1] = True
        else:
            raise ParseError(f"unknown line type {parts[0]!r}", lineno)
    if n is None:
        raise ParseError("missing problem line")
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0]) + 1
        raise ParseError(f"missing coordinates for vertex {missing}")
    return Coordinates(xs, ys)


def write_dimacs_co(c: Coordinates) -> str:
    out = [f"p aux sp co {len(c)}"]
    for i, (x, y) in enumerate(zip(c.x.tolist(), c.y.tolist())):
        out.append(f"v {i + 1} {x} {y}")
    return "\n".join(out) + "\n"


def read_graph(path) -> Graph:
    with open(path, "rb") as f:
        return parse_dimacs_gr(f.read())


def read_coordinates(path) -> Coordinates:
    with open(path, "rb") as f:
        return parse_dimacs_co(f.read())


# --- structural operations -----------------------------------------------------


def induced_subgraph(g: Graph, vertices: np.ndarray) -> Graph:
    """Subgraph on ``vertices``; vertex ``vertices[i]`` becomes ``i``."""
    vertices = np.asarray(vertices, dtype=np.int64)
    new_id = np.full(g.num_vertices, -1, dtype=np.int64)
    new_id[vertices] = np.arange(len(vertices))
    t, h = new_id[g.tails()], new_id[g.head]
    keep = (t >= 0) & (h >= 0)
    return Graph.from_edges(len(vertices), t[keep], h[keep], g.weight[keep])


def largest_scc(g: Graph, c: Optional[Coordinates] = None):
    """Restrict to the largest strongly connected component.

    Returns ``(graph, coordinates, old_ids)`` where ``old_ids[new] = old``.
    Ties between equally large components go to the one holding the smallest id.
    """
    n = g.num_vertices
    if n == 0:
        raise ValueError("empty graph")
    adj = sp.csr_matrix((np.ones(g.num_edges), g.head, g.first_out), shape=(n, n))
    _, labels = connected_components(adj, directed=True, connection="strong")
    sizes = np.bincount(labels)
    best = sizes.max()
    # first vertex (smallest id) whose component has maximum size
    winner = labels[np.flatnonzero(sizes[labels] == best)[0]]
    old_ids = np.flatnonzero(labels == winner).astype(np.int64)
    sub = induced_subgraph(g, old_ids)
    sub_c = None if c is None else Coordinates(c.x[old_ids], c.y[old_ids])
    return sub, sub_c, old_ids


def is_strongly_connected(g: Graph) -> bool:
    if g.num_vertices == 0:
        return False
    forward = dijkstra(g, 0)
    backward = dijkstra(reverse(g), 0)
    return bool(np.all(forward < INF) and np.all(backward < INF))


def reverse(g: Graph) -> Graph:
    return Graph.from_edges(g.num_vertices, g.head, g.tails(), g.weight)


def permute(g: Graph, c: Optional[Coordinates], order):
    """Relabel so that output vertex ``r`` is the input vertex of rank ``r``.

    ``order[v]`` is the rank of input vertex ``v``.
    """
    order = np.asarray(order, dtype=np.int64)
    n = g.num_vertices
    if len(order) != n or not np.array_equal(np.sort(order), np.arange(n)):
        raise ValueError("order is not a permutation of the vertex ids")
    pg = Graph.from_edges(n, order[g.tails()], order[g.head], g.weight)
    if c is None:
        return pg, None
    inv = np.empty(n, dtype=np.int64)
    inv[order] = np.arange(n)
    return pg, Coordinates(c.x[inv], c.y[inv])


# --- Dijkstra ----------------------------------------------------------------


def dijkstra(g: Graph, s: int, stop: Optional[Callable[[int, int], bool]] = None) -> np.ndarray:
    """Exact distances from ``s``; unreachable vertices hold INF.

    ``stop(v, dist)`` is called after settling each vertex; returning True ends the
    search. Vertices settled up to that point carry exact distances, the rest
    hold tentative values or INF.
    """
    n = g.num_vertices
    dist = np.full(n, INF, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    first_out, head, weight = g.first_out, g.head.tolist(), g.weight.tolist()
    dist[s] = 0
    queue = [(0, s)]
    while queue:
        d, v = heapq.heappop(queue)
        if done[v]:
            continue
        done[v] = True
        if stop is not None and stop(v, d):
            break
        for i in range(first_out[v], first_out[v + 1]):
            w, nd = head[i], d + weight[i]
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(queue, (nd, w))
    return dist


@numba.njit(cache=True)
def dijkstra_kernel(first_out, head, weight, s, dist, settled, max_settled):
    """Dijkstra writing into caller-owned ``dist`` (all INF on entry).

    Settled vertices are appended to ``settled`` in settling order, ties broken by
    vertex id; stops after ``max_settled`` settles. Returns the number settled.
    ``dist`` entries of every touched vertex are left set; callers reset them.
    """
    n_settled = 0
    dist[s] = 0
    queue = [(np.int64(0), np.int64(s))]
    while queue and n_settled < max_settled:
        d, v = heapq.heappop(queue)
        if d > dist[v]:
            continue
        settled[n_settled] = v
        n_settled += 1
        for i in range(first_out[v], first_out[v + 1]):
            w = head[i]
            nd = d + weight[i]
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(queue, (nd, w))
    return n_settled


def dijkstra_ball(g: Graph, center: int, size: int) -> np.ndarray:
    """The ``size`` vertices closest to ``center`` in settling order (ties by id)."""
    dist = np.full(g.num_vertices, INF, dtype=np.int64)
    settled = np.empty(g.num_vertices, dtype=np.int64)
    count = dijkstra_kernel(g.first_out, g.head, g.weight, center, dist, settled, size)
    return settled[:count].copy()
