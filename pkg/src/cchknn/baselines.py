"""Reference k-NN algorithms: incremental network expansion (plain Dijkstra) and
the bucket-based approach on elimination tree searches (BCCH)."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numba
import numpy as np

from cchknn.cch import CCH, SearchContext, forward_kernel, maybe_audit, reset_kernel
from cchknn.graph import INF, Graph
from cchknn.knn import KnnResult


def _check_args(targets, k):
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(targets) == 0:
        raise ValueError("empty target set")


@numba.njit(cache=True)
def _ine_kernel(first_out, head, weight, s, is_target, k, out_t, out_d, inf):
    n = len(first_out) - 1
    dist = np.full(n, inf, dtype=np.int64)
    dist[s] = 0
    queue = [(np.int64(0), np.int64(s))]
    found = 0
    while queue and found < k:
        d, v = heapq.heappop(queue)
        if d > dist[v]:
            continue
        if is_target[v]:
            out_t[found] = v
            out_d[found] = d
            found += 1
        for i in range(first_out[v], first_out[v + 1]):
            w = head[i]
            nd = d + weight[i]
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(queue, (nd, w))
    return found


def ine_select(num_vertices: int, targets) -> np.ndarray:
    """Selection for plain Dijkstra: a target membership mask."""
    targets = np.asarray(targets, dtype=np.int64)
    if len(targets) == 0:
        raise ValueError("empty target set")
    is_target = np.zeros(num_vertices, dtype=np.bool_)
    is_target[targets] = True
    return is_target


def ine_query(g: Graph, is_target: np.ndarray, s: int, k: int, num_targets: int = -1) -> KnnResult:
    if k < 1:
        raise ValueError("k must be at least 1")
    if num_targets < 0:
        num_targets = int(is_target.sum())
    kk = min(k, num_targets)
    out_t = np.empty(kk, dtype=np.int64)
    out_d = np.empty(kk, dtype=np.int64)
    m = _ine_kernel(g.first_out, g.head, g.weight, s, is_target, kk, out_t, out_d, INF)
    return KnnResult(out_t[:m].tolist(), out_d[:m].tolist())


def ine_knn(g: Graph, s: int, targets, k: int) -> KnnResult:
    """Dijkstra from ``s`` until ``k`` targets are settled."""
    targets = np.asarray(targets, dtype=np.int64)
    _check_args(targets, k)
    return ine_query(g, ine_select(g.num_vertices, targets), s, k)


# --- BCCH ------------------------------------------------------------------------------


@dataclass(frozen=True)
class BucketStore:
    """Per-vertex buckets in CSR form, each sorted by (distance, target)."""

    first: np.ndarray
    target: np.ndarray
    dist: np.ndarray
    num_targets: int

    @property
    def num_entries(self) -> int:
        return len(self.target)

    @property
    def nbytes(self) -> int:
        return self.first.nbytes + self.target.nbytes + self.dist.nbytes

    def bucket(self, v: int) -> list[tuple[int, int]]:
        lo, hi = self.first[v], self.first[v + 1]
        return list(zip(self.target[lo:hi].tolist(), self.dist[lo:hi].tolist()))


@numba.njit(cache=True)
def _path_lengths(parent, targets):
    total = 0
    for t in targets:
        v = t
        while v != -1:
            total += 1
            v = parent[v]
    return total


@numba.njit(cache=True)
def _bcch_select_kernel(up_first, up_head, up_w, down_w, parent, targets, stall,
                        capacity, inf):
    n = len(parent)
    rev = np.full(n, inf, dtype=np.int64)
    ent_v = np.empty(capacity, dtype=np.int32)
    ent_t = np.empty(capacity, dtype=np.int32)
    ent_d = np.empty(capacity, dtype=np.uint32)
    count = 0
    for t in targets:
        rev[t] = 0
        v = t
        while v != -1:
            d = rev[v]
            if d < inf:
                for e in range(up_first[v], up_first[v + 1]):
                    nd = d + down_w[e]
                    w = up_head[e]
                    if nd < rev[w]:
                        rev[w] = nd
            v = parent[v]
        v = t
        while v != -1:
            d = rev[v]
            if d < inf:
                keep = True
                if stall:
                    # v is stalled if some higher neighbor w reaches t faster
                    for e in range(up_first[v], up_first[v + 1]):
                        w = up_head[e]
                        if up_w[e] < inf and rev[w] < inf and up_w[e] + rev[w] < d:
                            keep = False
                            break
                if keep:
                    ent_v[count] = v
                    ent_t[count] = t
                    ent_d[count] = d
                    count += 1
            v = parent[v]
        v = t
        while v != -1:
            rev[v] = inf
            v = parent[v]
    # counting sort by vertex, then sort each bucket by (distance, target)
    first = np.zeros(n + 1, dtype=np.int64)
    for i in range(count):
        first[ent_v[i] + 1] += 1
    for v in range(n):
        first[v + 1] += first[v]
    pos = first[:-1].copy()
    out_t = np.empty(count, dtype=np.int32)
    out_d = np.empty(count, dtype=np.uint32)
    for i in range(count):
        p = pos[ent_v[i]]
        out_t[p] = ent_t[i]
        out_d[p] = ent_d[i]
        pos[ent_v[i]] += 1
    for v in range(n):
        lo, hi = first[v], first[v + 1]
        if hi - lo > 1:
            key = out_d[lo:hi].astype(np.int64) * (n + 1) + out_t[lo:hi]
            order = np.argsort(key)
            out_t[lo:hi] = out_t[lo:hi][order]
            out_d[lo:hi] = out_d[lo:hi][order]
    return first, out_t, out_d


def bcch_select(h: CCH, targets, stall_on_demand: bool = False) -> BucketStore:
    """Selection: deposit every target's reverse search space into buckets."""
    t = np.unique(np.asarray(targets, dtype=np.int64))
    if len(t) == 0:
        raise ValueError("empty target set")
    capacity = _path_lengths(h.parent, t)
    first, tt, dd = _bcch_select_kernel(h.up_first, h.up_head, h.up_weight, h.down_weight,
                                        h.parent, t, stall_on_demand, capacity, INF)
    return BucketStore(first, tt, dd, len(t))


@numba.njit(cache=True)
def _bcch_query_kernel(up_first, up_head, up_w, parent, first, b_t, b_d, fwd, s, k,
                       out_t, out_d, inf):
    forward_kernel(up_first, up_head, up_w, parent, fwd, s, inf)
    # out_t/out_d: sorted (by distance) list of the best k distinct targets so far
    m = 0
    v = s
    while v != -1:
        x = fwd[v]
        if x < inf:
            for i in range(first[v], first[v + 1]):
                bound = out_d[k - 1] if m == k else inf
                d = x + np.int64(b_d[i])
                if d >= bound:
                    break
                t = np.int64(b_t[i])
                # existing entry for t?
                j = 0
                while j < m and out_t[j] != t:
                    j += 1
                if j < m:
                    if d >= out_d[j]:
                        continue
                else:
                    if m < k:
                        m += 1
                    j = m - 1
                # shift larger entries right, insert d at its sorted position
                while j > 0 and out_d[j - 1] > d:
                    out_d[j] = out_d[j - 1]
                    out_t[j] = out_t[j - 1]
                    j -= 1
                out_d[j] = d
                out_t[j] = t
        v = parent[v]
    reset_kernel(parent, fwd, s, inf)
    return m


def bcch_query(ctx: SearchContext, h: CCH, buckets: BucketStore, s: int, k: int) -> KnnResult:
    """Forward search from ``s`` scanning buckets along the elimination tree path."""
    if k < 1:
        raise ValueError("k must be at least 1")
    kk = min(k, buckets.num_targets)
    out_t = np.empty(kk, dtype=np.int64)
    out_d = np.empty(kk, dtype=np.int64)
    m = _bcch_query_kernel(h.up_first, h.up_head, h.up_weight, h.parent, buckets.first,
                           buckets.target, buckets.dist, ctx.forward, s, kk, out_t, out_d, INF)
    maybe_audit(ctx)
    order = np.lexsort((out_t[:m], out_d[:m]))
    return KnnResult(out_t[:m][order].tolist(), out_d[:m][order].tolist())
