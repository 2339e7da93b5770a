"""Separator decomposition by recursive Inertial Flow dissection.

The decomposition tree stores, per node, the contiguous vertex range of its
subgraph in nested dissection order and where its own separator starts. All of
the k-NN machinery reads subgraph and separator membership off these ranges.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components, maximum_flow

from cchknn.graph import Coordinates, Graph, permute


class CutError(ValueError):
    """No vertex cut exists between the fixed source and sink sets."""


@dataclass(frozen=True)
class PartitionConfig:
    leaf_threshold: int = 32
    balance: float = 0.3


@dataclass(frozen=True)
class Cut:
    side_a: np.ndarray
    side_b: np.ndarray
    separator: np.ndarray


@dataclass(frozen=True)
class SepDecompTree:
    """Separator decomposition over nested-dissection-ordered vertices.

    Nodes are numbered in postorder, so the root is the last node. For node ``x``
    the subgraph ``G_x`` is ``[first_vertex[x], last_vertex[x]]`` and the separator
    is ``[first_sep[x], last_vertex[x]]``. Children of ``x`` are
    ``children[child_first[x]:child_first[x + 1]]`` in vertex order.
    """

    parent: np.ndarray
    child_first: np.ndarray
    children: np.ndarray
    first_vertex: np.ndarray
    last_vertex: np.ndarray
    first_sep: np.ndarray
    vertex_node: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return self.num_nodes - 1

    def children_of(self, x: int) -> np.ndarray:
        return self.children[self.child_first[x]:self.child_first[x + 1]]

    def subgraph_range(self, x: int) -> tuple[int, int]:
        return int(self.first_vertex[x]), int(self.last_vertex[x])

    def separator_range(self, x: int) -> tuple[int, int]:
        return int(self.first_sep[x]), int(self.last_vertex[x])

    def contains(self, x: int, v: int) -> bool:
        return self.first_vertex[x] <= v <= self.last_vertex[x]


@dataclass(frozen=True)
class NestedDissectionOrder:
    rank: np.ndarray  # rank[v] for input vertex v
    vertex: np.ndarray  # vertex[r] = input vertex with rank r


# --- Inertial Flow -------------------------------------------------------------


def _directions(x: np.ndarray, y: np.ndarray):
    # S->N, W->E, SW->NE, SE->NW
    return (y, x, x + y, y - x)


def _min_vertex_cut(adj: sp.csr_matrix, sources: np.ndarray, sinks: np.ndarray):
    """Minimum vertex cut between two fixed vertex sets via vertex splitting.

    Returns the source-side and sink-side minimum cuts as (A, B, S) index arrays
    local to ``adj``.
    """
    n = adj.shape[0]
    big = n + 1
    src, snk = 2 * n, 2 * n + 1
    cap_split = np.ones(n, dtype=np.int32)
    cap_split[sources] = big
    cap_split[sinks] = big
    coo = adj.tocoo()
    rows = np.concatenate([2 * np.arange(n), 2 * coo.row + 1, np.full(len(sources), src), 2 * sinks + 1])
    cols = np.concatenate([2 * np.arange(n) + 1, 2 * coo.col, 2 * sources, np.full(len(sinks), snk)])
    caps = np.concatenate([
        cap_split,
        np.full(len(coo.row), big, dtype=np.int32),
        np.full(len(sources), big, dtype=np.int32),
        np.full(len(sinks), big, dtype=np.int32),
    ]).astype(np.int32)
    cap = sp.csr_matrix((caps, (rows, cols)), shape=(2 * n + 2, 2 * n + 2))
    res = maximum_flow(cap, src, snk, method="dinic")
    if res.flow_value >= big:
        raise CutError("source and sink sets are adjacent")
    # flow is antisymmetric, so cap - flow also yields the reverse residual arcs
    residual = (cap - res.flow).tocsr()
    residual.data[residual.data < 0] = 0
    residual.eliminate_zeros()

    reach = np.zeros(2 * n + 2, dtype=bool)
    reach[breadth_first_order(residual, src, directed=True, return_predecessors=False)] = True
    vin, vout = reach[0:2 * n:2], reach[1:2 * n:2]
    sep_s = np.flatnonzero(vin & ~vout)
    a_s = np.flatnonzero(vout)
    b_s = np.flatnonzero(~vin & ~vout)

    back = np.zeros(2 * n + 2, dtype=bool)
    back[breadth_first_order(residual.T.tocsr(), snk, directed=True, return_predecessors=False)] = True
    vin, vout = back[0:2 * n:2], back[1:2 * n:2]
    sep_t = np.flatnonzero(vout & ~vin)
    b_t = np.flatnonzero(vin)
    a_t = np.flatnonzero(~vin & ~vout)
    return (a_s, b_s, sep_s), (a_t, b_t, sep_t)


def inertial_flow_cut(g: Graph, c: Coordinates, subset, balance: float = 0.3) -> Cut:
    """Balanced minimum vertex separator of the subgraph induced by ``subset``.

    Tries four projection directions; per direction the ``ceil(balance * n)``
    extreme vertices at each end are fixed to the two sides. The smallest cut wins,
    ties going to the earlier direction. Within a direction the more balanced of
    the source-side and sink-side minimum cuts is kept.
    """
    subset = np.asarray(subset, dtype=np.int64)
    n = len(subset)
    if n < 2:
        raise ValueError("need at least 2 vertices to cut")
    if not 0 < balance <= 0.5:
        raise ValueError("balance must lie in (0, 1/2]")
    if n == 2:
        # edge cut: nothing to separate with vertices
        return Cut(subset[:1].copy(), subset[1:].copy(), subset[:0].copy())
    adj = g.undirected[subset][:, subset].tocsr()
    fixed = max(1, min(math.ceil(balance * n), n // 2))
    best = None
    for proj in _directions(c.x[subset], c.y[subset]):
        order = np.lexsort((subset, proj))
        try:
            cuts = _min_vertex_cut(adj, order[:fixed], order[n - fixed:])
        except CutError:
            continue
        a, b, s = max(cuts, key=lambda cut: min(len(cut[0]), len(cut[1])))
        if best is None or len(s) < len(best[2]):
            best = (a, b, s)
    if best is None:
        raise CutError("no direction admits a vertex cut")
    a, b, s = best
    return Cut(np.sort(subset[a]), np.sort(subset[b]), np.sort(subset[s]))


# --- decomposition -------------------------------------------------------------


class _Node:
    __slots__ = ("separator", "children")

    def __init__(self, separator, children):
        self.separator = separator
        self.children = children


def _components(g: Graph, vertices: np.ndarray) -> list[np.ndarray]:
    if len(vertices) == 0:
        return []
    sub = g.undirected[vertices][:, vertices]
    k, labels = connected_components(sub, directed=False)
    comps = [np.sort(vertices[labels == i]) for i in range(k)]
    comps.sort(key=lambda comp: comp[0])
    return comps


def _dissect(g: Graph, c: Coordinates, vertices: np.ndarray, cfg: PartitionConfig) -> _Node:
    if len(vertices) <= max(cfg.leaf_threshold, 1):
        return _Node(vertices, [])
    try:
        cut = inertial_flow_cut(g, c, vertices, cfg.balance)
    except CutError:
        return _Node(vertices, [])
    side_a, side_b, sep = cut.side_a, cut.side_b, cut.separator
    if len(sep) == 0:
        # a separator node may not be empty: promote one vertex
        sep, side_b = side_b[:1], side_b[1:]
    parts = _components(g, side_a) + _components(g, side_b)
    return _Node(sep, [_dissect(g, c, part, cfg) for part in parts])


def build_sep_decomposition(g: Graph, c: Coordinates, leaf_threshold: int = 32, balance: float = 0.3):
    """Recursively dissect ``g`` and renumber it in nested dissection order.

    Returns ``(tree, order, permuted graph, permuted coordinates)``.
    """
    import sys

    cfg = PartitionConfig(leaf_threshold, balance)
    n = g.num_vertices
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * n + 1000))
    try:
        roots = [_dissect(g, c, comp, cfg) for comp in _components(g, np.arange(n))]
    finally:
        sys.setrecursionlimit(limit)
    if len(roots) != 1:
        raise ValueError("graph is not connected")

    parent, first_vertex, last_vertex, first_sep = [], [], [], []
    children_lists: list[list[int]] = []
    vertex_by_rank: list[np.ndarray] = []
    next_rank = 0

    # iterative postorder walk
    stack = [(roots[0], False)]
    ids: dict[int, int] = {}
    starts: dict[int, int] = {}
    while stack:
        node, expanded = stack.pop()
        if not expanded:
            starts[id(node)] = next_rank
            stack.append((node, True))
            for child in reversed(node.children):
                stack.append((child, False))
            continue
        idx = len(parent)
        ids[id(node)] = idx
        parent.append(-1)
        kids = [ids[id(ch)] for ch in node.children]
        for k in kids:
            parent[k] = idx
        children_lists.append(kids)
        first_vertex.append(starts[id(node)])
        first_sep.append(next_rank)
        vertex_by_rank.append(node.separator)
        next_rank += len(node.separator)
        last_vertex.append(next_rank - 1)

    vertex = np.concatenate(vertex_by_rank)
    rank = np.empty(n, dtype=np.int64)
    rank[vertex] = np.arange(n)
    child_first = np.zeros(len(parent) + 1, dtype=np.int64)
    np.cumsum([len(k) for k in children_lists], out=child_first[1:])
    children = np.array([k for ks in children_lists for k in ks], dtype=np.int64)
    first_sep_a = np.array(first_sep, dtype=np.int64)
    last_vertex_a = np.array(last_vertex, dtype=np.int64)
    vertex_node = np.empty(n, dtype=np.int64)
    for x in range(len(parent)):
        vertex_node[first_sep_a[x]:last_vertex_a[x] + 1] = x
    tree = SepDecompTree(
        parent=np.array(parent, dtype=np.int64),
        child_first=child_first,
        children=children,
        first_vertex=np.array(first_vertex, dtype=np.int64),
        last_vertex=last_vertex_a,
        first_sep=first_sep_a,
        vertex_node=vertex_node,
    )
    pg, pc = permute(g, c, rank)
    return tree, NestedDissectionOrder(rank, vertex), pg, pc


def node_of_vertex(tree: SepDecompTree, v: int) -> int:
    """The node whose separator holds ``v``."""
    return int(tree.vertex_node[v])


def check_tree(tree: SepDecompTree, g: Graph) -> None:
    """Raise AssertionError unless every structural invariant holds for ``g``,
    which must already be in nested dissection order."""
    n = g.num_vertices
    root = tree.root
    assert tree.parent[root] == -1
    assert tree.first_vertex[root] == 0 and tree.last_vertex[root] == n - 1
    owner = np.full(n, -1, dtype=np.int64)
    for x in range(tree.num_nodes):
        fv, lv, fs = tree.first_vertex[x], tree.last_vertex[x], tree.first_sep[x]
        assert fv <= fs <= lv, f"node {x}: bad ranges"
        assert np.all(owner[fs:lv + 1] == -1), f"node {x}: overlapping separators"
        owner[fs:lv + 1] = x
        kids = tree.children_of(x)
        pos = fv
        for y in kids:
            assert tree.parent[y] == x
            assert tree.first_vertex[y] == pos, f"node {x}: children not contiguous"
            assert tree.last_vertex[x] > tree.last_vertex[y]
            pos = tree.last_vertex[y] + 1
        assert pos == fs, f"node {x}: children do not cover [first_vertex, first_sep)"
        if x != root:
            assert tree.parent[x] > x, "nodes not in postorder"
    assert np.all(owner >= 0)
    assert np.array_equal(owner, tree.vertex_node)
    # separation: no edge joins two different child subgraphs of a node
    t, h = g.tails(), g.head
    for x in range(tree.num_nodes):
        kids = tree.children_of(x)
        if len(kids) < 2:
            continue
        label = np.full(n, -1, dtype=np.int64)
        for i, y in enumerate(kids):
            label[tree.first_vertex[y]:tree.last_vertex[y] + 1] = i
        lt, lh = label[t], label[h]
        assert not np.any((lt >= 0) & (lh >= 0) & (lt != lh)), f"node {x} does not separate its children"


# --- binary formats ----------------------------------------------------------------

_U32_NONE = 0xFFFFFFFF


def tree_to_bytes(tree: SepDecompTree) -> bytes:
    k = tree.num_nodes
    header = b"SDT1" + struct.pack("<II", k, len(tree.children))
    parent = np.where(tree.parent < 0, _U32_NONE, tree.parent)
    rows = np.stack([
        parent,
        tree.child_first[:-1],
        tree.child_first[1:],
        tree.first_vertex,
        tree.last_vertex,
        tree.first_sep,
    ], axis=1).astype("<u4")
    return header + rows.tobytes() + tree.children.astype("<u4").tobytes()


def tree_from_bytes(data: bytes) -> SepDecompTree:
    if data[:4] != b"SDT1":
        raise ValueError("not an SDT1 file")
    k, nc = struct.unpack_from("<II", data, 4)
    rows = np.frombuffer(data, dtype="<u4", count=6 * k, offset=12).reshape(k, 6).astype(np.int64)
    children = np.frombuffer(data, dtype="<u4", count=nc, offset=12 + 24 * k).astype(np.int64)
    parent = np.where(rows[:, 0] == _U32_NONE, -1, rows[:, 0])
    child_first = np.append(rows[:, 1], rows[-1, 2]) if k else np.zeros(1, dtype=np.int64)
    first_sep, last_vertex = rows[:, 5], rows[:, 4]
    n = int(last_vertex[-1]) + 1
    vertex_node = np.empty(n, dtype=np.int64)
    for x in range(k):
        vertex_node[first_sep[x]:last_vertex[x] + 1] = x
    return SepDecompTree(parent, child_first.astype(np.int64), children, rows[:, 3].copy(),
                         last_vertex.copy(), first_sep.copy(), vertex_node)


def order_to_bytes(order: NestedDissectionOrder) -> bytes:
    return order.rank.astype("<u4").tobytes()


def order_from_bytes(data: bytes) -> NestedDissectionOrder:
    rank = np.frombuffer(data, dtype="<u4").astype(np.int64)
    vertex = np.empty_like(rank)
    vertex[rank] = np.arange(len(rank))
    return NestedDissectionOrder(rank, vertex)
