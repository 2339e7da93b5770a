"""Customizable contraction hierarchy: contraction, customization, elimination
tree and point-to-point queries.

Vertex ids of the input graph must already equal contraction ranks, so "higher
ranked" simply means "larger id" everywhere below.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass, replace

import numba
import numpy as np

from cchknn.graph import INF, Graph


class InvariantError(AssertionError):
    """A debug-mode audit found corrupted search state."""


DEBUG = False
"""When set, every query wrapper audits its SearchContext afterwards."""

audit_stats = {"audits": 0, "violations": 0}


def set_debug(enabled: bool) -> None:
    global DEBUG
    DEBUG = enabled


@dataclass(frozen=True)
class CCH:
    """Upward graph H plus its elimination tree.

    ``up_head[up_first[v]:up_first[v + 1]]`` is the rank-sorted upward
    neighborhood of ``v``. ``up_weight[e]`` is the length of traversing edge
    ``e = (v, w)`` from v to w, ``down_weight[e]`` from w to v. Both hold INF
    until customized.
    """

    up_first: np.ndarray
    up_head: np.ndarray
    up_weight: np.ndarray
    down_weight: np.ndarray
    parent: np.ndarray

    @property
    def num_vertices(self) -> int:
        return len(self.up_first) - 1

    @property
    def num_edges(self) -> int:
        return len(self.up_head)

    def upward(self, v: int) -> np.ndarray:
        return self.up_head[self.up_first[v]:self.up_first[v + 1]]

    def edge_index(self, v: int, w: int) -> int:
        lo = self.up_first[v]
        i = lo + np.searchsorted(self.upward(v), w)
        if i < self.up_first[v + 1] and self.up_head[i] == w:
            return int(i)
        return -1

    def root_path(self, v: int) -> list[int]:
        path = []
        while v != -1:
            path.append(int(v))
            v = self.parent[v]
        return path


# --- preprocessing -----------------------------------------------------------------


def contract(g: Graph) -> CCH:
    """Chordal completion of ``g`` along the identity order.

    Uses the elimination game in its merge form: when ``v`` is eliminated, its
    higher neighbors other than the lowest one, ``p``, become neighbors of ``p``.
    That yields exactly the fill of pairwise-connecting all higher neighbors.
    """
    n = g.num_vertices
    t, h = g.tails(), g.head
    lo, hi = np.minimum(t, h), np.maximum(t, h)
    upper: list[set[int]] = [set() for _ in range(n)]
    for a, b in zip(lo.tolist(), hi.tolist()):
        upper[a].add(b)
    sizes = np.zeros(n + 1, dtype=np.int64)
    heads = []
    for v in range(n):
        nb = upper[v]
        if nb:
            ordered = sorted(nb)
            p = ordered[0]
            if len(ordered) > 1:
                upper[p].update(ordered[1:])
            heads.append(ordered)
            sizes[v + 1] = len(ordered)
        else:
            heads.append(())
        upper[v] = None  # free memory as we go
    up_first = np.cumsum(sizes)
    up_head = np.fromiter((w for row in heads for w in row), dtype=np.int64, count=int(up_first[-1]))
    m = len(up_head)
    cch = CCH(
        up_first=up_first,
        up_head=up_head,
        up_weight=np.full(m, INF, dtype=np.int64),
        down_weight=np.full(m, INF, dtype=np.int64),
        parent=np.empty(0, dtype=np.int64),
    )
    return replace(cch, parent=build_elimination_tree(cch))


def build_elimination_tree(h: CCH) -> np.ndarray:
    """parent[v] = lowest-ranked upward neighbor of v, -1 for roots."""
    n = h.num_vertices
    parent = np.full(n, -1, dtype=np.int64)
    has_up = h.up_first[1:] > h.up_first[:-1]
    parent[has_up] = h.up_head[h.up_first[:-1][has_up]]
    return parent


@numba.njit(cache=True)
def _find_edge(up_first, up_head, v, w):
    lo, hi = up_first[v], up_first[v + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if up_head[mid] < w:
            lo = mid + 1
        else:
            hi = mid
    if lo < up_first[v + 1] and up_head[lo] == w:
        return lo
    return -1


@numba.njit(cache=True)
def _customize_kernel(up_first, up_head, g_first, g_head, g_weight, up_w, down_w, inf):
    n = len(up_first) - 1
    for a in range(n):
        for i in range(g_first[a], g_first[a + 1]):
            b = g_head[i]
            length = g_weight[i]
            if a < b:
                e = _find_edge(up_first, up_head, a, b)
                if length < up_w[e]:
                    up_w[e] = length
            else:
                e = _find_edge(up_first, up_head, b, a)
                if length < down_w[e]:
                    down_w[e] = length
    # lower triangles {v, u, w}, v < u < w, bottom-up in v
    for v in range(n):
        end = up_first[v + 1]
        for i in range(up_first[v], end):
            u = up_head[i]
            pos = up_first[u]
            for j in range(i + 1, end):
                w = up_head[j]
                while up_head[pos] != w:
                    pos += 1
                cand = down_w[i] + up_w[j]
                if cand < up_w[pos]:
                    up_w[pos] = cand if cand < inf else inf
                cand = down_w[j] + up_w[i]
                if cand < down_w[pos]:
                    down_w[pos] = cand if cand < inf else inf


def customize(h: CCH, g: Graph) -> CCH:
    """Assign lengths of ``g`` to H and run triangle relaxation bottom-up."""
    up_w = np.full(h.num_edges, INF, dtype=np.int64)
    down_w = np.full(h.num_edges, INF, dtype=np.int64)
    _customize_kernel(h.up_first, h.up_head, g.first_out, g.head, g.weight, up_w, down_w, INF)
    return replace(h, up_weight=up_w, down_weight=down_w)


# --- elimination tree searches -------------------------------------------------------


class SearchContext:
    """Forward and reverse distance labels, all INF between operations."""

    def __init__(self, num_vertices: int):
        self.forward = np.full(num_vertices, INF, dtype=np.int64)
        self.reverse = np.full(num_vertices, INF, dtype=np.int64)

    def is_clean(self) -> bool:
        return bool(np.all(self.forward == INF) and np.all(self.reverse == INF))

    def audit(self) -> None:
        """Full-array label audit; raises InvariantError on leftovers."""
        audit_stats["audits"] += 1
        if not self.is_clean():
            audit_stats["violations"] += 1
            raise InvariantError("search context holds non-INF labels after an operation")


def maybe_audit(ctx: SearchContext) -> None:
    if DEBUG:
        ctx.audit()


def record_audits(audits: int, violations: int) -> None:
    """Fold the result of audits run inside a compiled loop into the counters."""
    audit_stats["audits"] += audits
    audit_stats["violations"] += violations
    if violations:
        raise InvariantError(f"{violations} of {audits} audits found non-INF labels")


@numba.njit(cache=True)
def labels_clean_kernel(fwd, rev, inf):
    for i in range(len(fwd)):
        if fwd[i] != inf or rev[i] != inf:
            return False
    return True


@numba.njit(cache=True)
def forward_kernel(up_first, up_head, up_w, parent, fwd, s, inf):
    fwd[s] = 0
    v = s
    while v != -1:
        d = fwd[v]
        if d < inf:
            for e in range(up_first[v], up_first[v + 1]):
                nd = d + up_w[e]
                w = up_head[e]
                if nd < fwd[w]:
                    fwd[w] = nd
        v = parent[v]


@numba.njit(cache=True)
def reset_kernel(parent, labels, s, inf):
    v = s
    while v != -1:
        labels[v] = inf
        v = parent[v]


@numba.njit(cache=True)
def reverse_kernel(up_first, up_head, down_w, parent, fwd, rev, start, inf):
    """Reverse elimination tree search from ``start`` with labels already seeded.

    Combines with forward labels on the way up and leaves every label it touched
    at INF. Relaxation is skipped once a label cannot beat the tentative result.
    """
    best = inf
    v = start
    while v != -1:
        d = rev[v]
        if d < inf:
            f = fwd[v]
            if f < inf and f + d < best:
                best = f + d
            if d < best:
                for e in range(up_first[v], up_first[v + 1]):
                    nd = d + down_w[e]
                    w = up_head[e]
                    if nd < rev[w]:
                        rev[w] = nd
            rev[v] = inf
        v = parent[v]
    return best


@numba.njit(cache=True)
def point_query_kernel(up_first, up_head, down_w, parent, fwd, rev, t, inf):
    rev[t] = 0
    return reverse_kernel(up_first, up_head, down_w, parent, fwd, rev, t, inf)


def forward_elim_search(ctx: SearchContext, h: CCH, s: int) -> list[int]:
    """Forward labels from ``s`` along its elimination tree path; returns the path."""
    forward_kernel(h.up_first, h.up_head, h.up_weight, h.parent, ctx.forward, s, INF)
    return h.root_path(s)


def reverse_elim_search(ctx: SearchContext, h: CCH, init, start_lowest: int) -> int:
    """Reverse search seeded with ``(vertex, offset)`` pairs, all of which must lie
    on the tree path from ``start_lowest``. Returns min over scanned v of
    forward[v] + reverse[v]."""
    for b, offset in init:
        if offset < ctx.reverse[b]:
            ctx.reverse[b] = offset
    return int(reverse_kernel(h.up_first, h.up_head, h.down_weight, h.parent,
                              ctx.forward, ctx.reverse, start_lowest, INF))


def reset_forward(ctx: SearchContext, h: CCH, s: int) -> None:
    reset_kernel(h.parent, ctx.forward, s, INF)


def elim_query(ctx: SearchContext, h: CCH, s: int, t: int) -> int:
    """Point-to-point elimination tree query."""
    forward_kernel(h.up_first, h.up_head, h.up_weight, h.parent, ctx.forward, s, INF)
    d = point_query_kernel(h.up_first, h.up_head, h.down_weight, h.parent,
                           ctx.forward, ctx.reverse, t, INF)
    reset_kernel(h.parent, ctx.forward, s, INF)
    maybe_audit(ctx)
    return int(d)


@numba.njit(cache=True)
def _bidir_kernel(up_first, up_head, up_w, down_w, s, t, inf):
    n = len(up_first) - 1
    fwd = np.full(n, inf, dtype=np.int64)
    rev = np.full(n, inf, dtype=np.int64)
    fwd[s] = 0
    rev[t] = 0
    fq = [(np.int64(0), np.int64(s))]
    rq = [(np.int64(0), np.int64(t))]
    best = inf
    while fq or rq:
        fmin = fq[0][0] if fq else inf
        rmin = rq[0][0] if rq else inf
        if fmin >= best and rmin >= best:
            break
        if fmin <= rmin:
            d, v = heapq.heappop(fq)
            if d > fwd[v]:
                continue
            if rev[v] < inf and d + rev[v] < best:
                best = d + rev[v]
            for e in range(up_first[v], up_first[v + 1]):
                w = up_head[e]
                nd = d + up_w[e]
                if nd < fwd[w]:
                    fwd[w] = nd
                    heapq.heappush(fq, (nd, w))
        else:
            d, v = heapq.heappop(rq)
            if d > rev[v]:
                continue
            if fwd[v] < inf and d + fwd[v] < best:
                best = d + fwd[v]
            for e in range(up_first[v], up_first[v + 1]):
                w = up_head[e]
                nd = d + down_w[e]
                if nd < rev[w]:
                    rev[w] = nd
                    heapq.heappush(rq, (nd, w))
    return best


def cch_dijkstra_query(h: CCH, s: int, t: int) -> int:
    """Bidirectional upward Dijkstra on H; independent of the elimination tree."""
    return int(_bidir_kernel(h.up_first, h.up_head, h.up_weight, h.down_weight, s, t, INF))


# --- binary format -------------------------------------------------------------------

_U32_NONE = 0xFFFFFFFF


def cch_to_bytes(h: CCH, rank: np.ndarray) -> bytes:
    """Serialize as CCH1. ``rank`` maps every vertex of the original input file
    to its rank, or -1 if the vertex was dropped before preprocessing."""
    n, m = h.num_vertices, h.num_edges
    parts = [
        b"CCH1",
        struct.pack("<III", len(rank), n, m),
        np.where(rank < 0, _U32_NONE, rank).astype("<u4").tobytes(),
        h.up_first.astype("<u4").tobytes(),
        h.up_head.astype("<u4").tobytes(),
        h.up_weight.astype("<u4").tobytes(),
        h.down_weight.astype("<u4").tobytes(),
        np.where(h.parent < 0, _U32_NONE, h.parent).astype("<u4").tobytes(),
    ]
    return b"".join(parts)


def cch_from_bytes(data: bytes) -> tuple[CCH, np.ndarray]:
    if data[:4] != b"CCH1":
        raise ValueError("not a CCH1 file")
    n_orig, n, m = struct.unpack_from("<III", data, 4)
    offset = 16

    def take(count):
        nonlocal offset
        arr = np.frombuffer(data, dtype="<u4", count=count, offset=offset).astype(np.int64)
        offset += 4 * count
        return arr

    rank = take(n_orig)
    rank[rank == _U32_NONE] = -1
    up_first, up_head = take(n + 1), take(m)
    up_w, down_w = take(m), take(m)
    parent = take(n)
    parent[parent == _U32_NONE] = -1
    if offset != len(data):
        raise ValueError("trailing bytes in CCH1 file")
    return CCH(up_first, up_head, up_w, down_w, parent), rank
