"""k-nearest-neighbor queries by exploring the separator decomposition tree.

Selection builds a prefix-count array over the nested dissection order so the
targets inside any subgraph or separator form a contiguous slice. A query runs
one forward elimination tree search from the source, then descends the tree,
computing distances to targets and to child subgraphs with reverse searches
that reuse the forward labels.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numba
import numpy as np

from cchknn.cch import (
    CCH,
    SearchContext,
    forward_kernel,
    maybe_audit,
    point_query_kernel,
    reset_kernel,
    reverse_kernel,
)
from cchknn.graph import INF, Graph
from cchknn.partition import SepDecompTree

LOWER_BOUND = 0
EXACT = 1
_MODES = {"lower_bound": LOWER_BOUND, "lower-bound": LOWER_BOUND, "exact": EXACT}


def _mode(mode) -> int:
    if isinstance(mode, str):
        try:
            return _MODES[mode]
        except KeyError:
            raise ValueError(f"unknown distance mode {mode!r}") from None
    return int(mode)


@dataclass(frozen=True)
class KnnConfig:
    recursion_threshold: int = 8
    dist_mode: str = "lower_bound"


@dataclass(frozen=True)
class TargetIndex:
    targets: np.ndarray  # sorted, distinct
    prefix: np.ndarray  # prefix[i] = number of targets among vertices 0..i-1

    @property
    def num_targets(self) -> int:
        return len(self.targets)

    @property
    def nbytes(self) -> int:
        return self.targets.nbytes + self.prefix.nbytes


@dataclass
class KnnResult:
    targets: list[int]
    distances: list[int]
    pruned: list[tuple[int, int]] = field(default_factory=list)
    reverse_searches: int = 0

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.targets, self.distances))

    def __len__(self) -> int:
        return len(self.targets)


class KnnHeap:
    """The k closest targets seen so far, as a bounded max-heap."""

    def __init__(self, k: int):
        self.k = k
        self._heap: list[tuple[int, int]] = []

    def bound(self) -> int:
        """Current k-th best distance, INF while fewer than k entries."""
        return -self._heap[0][0] if len(self._heap) == self.k else INF

    def offer(self, target: int, dist: int) -> None:
        if dist < self.bound():
            heapq.heappush(self._heap, (-dist, target))
            if len(self._heap) > self.k:
                heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)

    def sorted(self) -> list[tuple[int, int]]:
        return sorted(((t, -d) for d, t in self._heap), key=lambda p: (p[1], p[0]))


def build_target_index(targets, num_vertices: int) -> TargetIndex:
    """Selection phase: sort the targets and sweep a prefix-count array."""
    t = np.asarray(targets, dtype=np.int64)
    if len(t) == 0:
        raise ValueError("empty target set")
    if t.min() < 0 or t.max() >= num_vertices:
        raise ValueError("target id out of range")
    present = np.zeros(num_vertices, dtype=np.int64)
    present[t] = 1
    prefix = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(present, out=prefix[1:])
    return TargetIndex(np.flatnonzero(present), prefix)


def targets_in_range(index: TargetIndex, l: int, r: int) -> tuple[int, np.ndarray]:
    """Number of targets with ids in ``[l, r]`` and that slice of the sorted targets."""
    n = len(index.prefix) - 1
    if not 0 <= l <= r < n:
        raise IndexError(f"range [{l}, {r}] outside [0, {n - 1}]")
    lo, hi = index.prefix[l], index.prefix[r + 1]
    return int(hi - lo), index.targets[lo:hi]


# --- subgraph boundaries -----------------------------------------------------------


@dataclass(frozen=True)
class Boundary:
    vertices: np.ndarray
    lowest: int
    offsets: np.ndarray


@numba.njit(cache=True)
def _entry_offsets_kernel(up_first, up_head, g_first, g_head, g_weight,
                          first_vertex, last_vertex, parent, out, inf):
    for x in range(len(first_vertex)):
        if parent[x] == -1:
            continue
        lo, hi = first_vertex[x], last_vertex[x]
        u = hi
        for e in range(up_first[u], up_first[u + 1]):
            b = up_head[e]
            best = inf
            for i in range(g_first[b], g_first[b + 1]):
                v = g_head[i]
                if lo <= v <= hi and g_weight[i] < best:
                    best = g_weight[i]
            out[e] = best


def entry_offsets(h: CCH, tree: SepDecompTree, g: Graph) -> np.ndarray:
    """For each non-root node X and each upward edge (u, b) of u = last_vertex(X):
    the shortest original edge from b into G_X. Aligned with H's edge array;
    metric dependent, so recompute after customization."""
    out = np.zeros(h.num_edges, dtype=np.int64)
    _entry_offsets_kernel(h.up_first, h.up_head, g.first_out, g.head, g.weight,
                          tree.first_vertex, tree.last_vertex, tree.parent, out, INF)
    return out


def boundary_of(tree: SepDecompTree, x: int, h: CCH, g: Graph) -> Boundary:
    """Boundary of G_X read off the upward neighborhood of its top vertex."""
    if tree.parent[x] == -1:
        raise ValueError("the root has no boundary")
    lo, hi = tree.subgraph_range(x)
    verts = h.upward(hi).copy()
    offsets = np.empty(len(verts), dtype=np.int64)
    for i, b in enumerate(verts.tolist()):
        lengths = [w for v, w in g.out_edges(b) if lo <= v <= hi]
        offsets[i] = min(lengths) if lengths else INF
    return Boundary(verts, int(verts[0]), offsets)


@numba.njit(cache=True)
def subgraph_dist_kernel(up_first, up_head, down_w, parent, fwd, rev, offsets, u, exact, inf):
    """Distance from the current forward source to G_X where u is X's top vertex."""
    lo, hi = up_first[u], up_first[u + 1]
    if lo == hi:
        return inf
    for e in range(lo, hi):
        b = up_head[e]
        off = offsets[e] if exact else 0
        if off < rev[b]:
            rev[b] = off
    return reverse_kernel(up_first, up_head, down_w, parent, fwd, rev, up_head[lo], inf)


def dist_to_subgraph(ctx: SearchContext, h: CCH, tree: SepDecompTree, x: int,
                     mode="lower_bound", offsets=None) -> int:
    """Distance from the current forward source to G_X (exact) or a lower bound.

    Forward labels must be present and the source must lie outside G_X.
    """
    exact = _mode(mode) == EXACT
    if exact and offsets is None:
        raise ValueError("exact mode needs entry offsets")
    if offsets is None:
        offsets = np.zeros(0, dtype=np.int64)
    u = int(tree.last_vertex[x])
    return int(subgraph_dist_kernel(h.up_first, h.up_head, h.down_weight, h.parent,
                                    ctx.forward, ctx.reverse, offsets, u, exact, INF))


# --- query ----------------------------------------------------------------------------


@numba.njit(cache=True)
def _examine(up_first, up_head, down_w, parent, fwd, rev, t, heap, k, inf):
    d = point_query_kernel(up_first, up_head, down_w, parent, fwd, rev, t, inf)
    bound = -heap[0][0] if len(heap) == k else inf
    if d < bound:
        heapq.heappush(heap, (-d, t))
        if len(heap) > k:
            heapq.heappop(heap)


@numba.njit(cache=True)
def knn_kernel(up_first, up_head, up_w, down_w, parent,
               child_first, children, first_vertex, last_vertex, first_sep,
               targets, prefix, offsets, fwd, rev, s, k, threshold, exact,
               out_t, out_d, pruned, inf):
    """Returns (number of results, number of pruned nodes, reverse searches)."""
    forward_kernel(up_first, up_head, up_w, parent, fwd, s, inf)
    heap = [(np.int64(0), np.int64(0))]
    heap.pop()
    searches = 0
    n_pruned = 0
    root = len(first_vertex) - 1
    stack = [(np.int64(root), np.int64(0))]
    while stack:
        x, dx = stack.pop()
        bound = -heap[0][0] if len(heap) == k else inf
        if dx >= bound:
            pruned[n_pruned, 0] = x
            pruned[n_pruned, 1] = dx
            n_pruned += 1
            continue
        lo, hi = first_vertex[x], last_vertex[x]
        c0, c1 = child_first[x], child_first[x + 1]
        count = prefix[hi + 1] - prefix[lo]
        if count < threshold or c0 == c1:
            for i in range(prefix[lo], prefix[hi + 1]):
                _examine(up_first, up_head, down_w, parent, fwd, rev, targets[i], heap, k, inf)
                searches += 1
            continue
        fs = first_sep[x]
        for i in range(prefix[fs], prefix[hi + 1]):
            _examine(up_first, up_head, down_w, parent, fwd, rev, targets[i], heap, k, inf)
            searches += 1
        nc = 0
        cand = np.empty(c1 - c0, dtype=np.int64)
        cdist = np.empty(c1 - c0, dtype=np.int64)
        for j in range(c0, c1):
            y = children[j]
            ylo, yhi = first_vertex[y], last_vertex[y]
            if prefix[yhi + 1] - prefix[ylo] == 0:
                continue
            if ylo <= s <= yhi:
                d = 0
            else:
                d = subgraph_dist_kernel(up_first, up_head, down_w, parent, fwd, rev,
                                         offsets, yhi, exact, inf)
                searches += 1
            cand[nc] = y
            cdist[nc] = d
            nc += 1
        order = np.argsort(cdist[:nc], kind="mergesort")
        # push in reverse so the closest child is explored first
        for j in range(nc - 1, -1, -1):
            stack.append((cand[order[j]], cdist[order[j]]))
    reset_kernel(parent, fwd, s, inf)
    m = len(heap)
    for i in range(m - 1, -1, -1):
        d, t = heapq.heappop(heap)
        out_t[i] = t
        out_d[i] = -d
    return m, n_pruned, searches


def knn_query(ctx: SearchContext, h: CCH, tree: SepDecompTree, index: TargetIndex,
              s: int, k: int, *, recursion_threshold: int = 8, mode="lower_bound",
              offsets=None) -> KnnResult:
    """The min(k, |T|) targets closest to ``s`` with exact distances, sorted."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if index.num_targets == 0:
        raise ValueError("empty target index")
    exact = _mode(mode) == EXACT
    if exact and offsets is None:
        raise ValueError("exact mode needs entry offsets")
    if offsets is None:
        offsets = np.zeros(0, dtype=np.int64)
    kk = min(k, index.num_targets)
    out_t = np.empty(kk, dtype=np.int64)
    out_d = np.empty(kk, dtype=np.int64)
    pruned = np.empty((tree.num_nodes, 2), dtype=np.int64)
    m, n_pruned, searches = knn_kernel(
        h.up_first, h.up_head, h.up_weight, h.down_weight, h.parent,
        tree.child_first, tree.children, tree.first_vertex, tree.last_vertex, tree.first_sep,
        index.targets, index.prefix, offsets, ctx.forward, ctx.reverse, s, kk,
        recursion_threshold, exact, out_t, out_d, pruned, INF,
    )
    maybe_audit(ctx)
    order = np.lexsort((out_t[:m], out_d[:m]))
    return KnnResult(
        targets=out_t[:m][order].tolist(),
        distances=out_d[:m][order].tolist(),
        pruned=[tuple(p) for p in pruned[:n_pruned].tolist()],
        reverse_searches=int(searches),
    )
