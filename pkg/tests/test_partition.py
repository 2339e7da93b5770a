import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cchknn.graph import Coordinates, Graph, is_strongly_connected
from cchknn.partition import (
    CutError,
    build_sep_decomposition,
    check_tree,
    inertial_flow_cut,
    node_of_vertex,
    order_from_bytes,
    order_to_bytes,
    tree_from_bytes,
    tree_to_bytes,
)
from cchknn.synth import grid_graph, path_graph, random_road_graph


def _nx_undirected(g: Graph, vertices=None) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.num_vertices) if vertices is None else vertices)
    for a, b in zip(g.tails().tolist(), g.head.tolist()):
        if h.has_node(a) and h.has_node(b):
            h.add_edge(a, b)
    return h


def min_balanced_separator(g: Graph, subset, balance: float) -> int:
    """Smallest vertex set whose removal lets the rest split into two parts with
    no edge between them, both of size >= floor(balance * n). Exhaustive."""
    subset = list(subset)
    n = len(subset)
    need = math.floor(balance * n)
    h = _nx_undirected(g, subset)
    for size in range(n + 1):
        for sep in itertools.combinations(subset, size):
            rest = h.subgraph(set(subset) - set(sep))
            comps = [len(c) for c in nx.connected_components(rest)]
            # can the components be grouped into two sides of size >= need?
            total = sum(comps)
            reachable = {0}
            for c in comps:
                reachable |= {r + c for r in reachable}
            if any(need <= r and need <= total - r and (r > 0 and total - r > 0) for r in reachable):
                return size
    return n


def _check_cut(g, subset, cut, balance):
    a, b, s = set(cut.side_a.tolist()), set(cut.side_b.tolist()), set(cut.separator.tolist())
    assert a | b | s == set(int(v) for v in subset)
    assert not (a & b or a & s or b & s)
    for t, h in zip(g.tails().tolist(), g.head.tolist()):
        assert not ((t in a and h in b) or (t in b and h in a))
    need = math.floor(balance * len(subset))
    assert len(a) >= need and len(b) >= need


def test_p5_cut(p5):
    g, c = p5
    cut = inertial_flow_cut(g, c, np.arange(5), 0.3)
    _check_cut(g, np.arange(5), cut, 0.3)
    assert len(cut.separator) == min_balanced_separator(g, range(5), 0.3) == 1
    assert cut.separator.tolist() == [2]


def test_grid3_cut(grid3):
    g, c = grid3
    cut = inertial_flow_cut(g, c, np.arange(9), 0.3)
    _check_cut(g, np.arange(9), cut, 0.3)
    assert len(cut.separator) <= 3
    assert len(cut.side_a) >= 2 and len(cut.side_b) >= 2
    assert len(cut.separator) >= min_balanced_separator(g, range(9), 0.3)


def test_two_vertex_subset_is_edge_cut(p5):
    g, c = p5
    cut = inertial_flow_cut(g, c, [0, 1], 0.3)
    assert (cut.side_a.tolist(), cut.side_b.tolist(), cut.separator.tolist()) == ([0], [1], [])


def test_cut_rejects_tiny_subset(p5):
    with pytest.raises(ValueError):
        inertial_flow_cut(p5[0], p5[1], [3], 0.3)


@settings(max_examples=25, deadline=None)
@given(st.integers(12, 40), st.integers(0, 10_000), st.sampled_from([0.2, 0.3, 0.5]))
def test_cut_post_conditions_random(n, seed, balance):
    g, c = random_road_graph(n, seed=seed, one_way=0.0)
    if g.num_vertices < 3:
        return
    subset = np.arange(g.num_vertices)
    try:
        cut = inertial_flow_cut(g, c, subset, balance)
    except CutError:
        # the fixed end sets touch in every direction; dissection keeps a leaf
        return
    _check_cut(g, subset, cut, balance)
    if g.num_vertices <= 14:
        assert len(cut.separator) >= min_balanced_separator(g, subset, balance)


def test_single_vertex_graph():
    g = Graph.from_edges(1, [], [], [])
    c = Coordinates(np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64))
    tree, order, pg, _ = build_sep_decomposition(g, c, 32)
    assert tree.num_nodes == 1
    assert tree.subgraph_range(0) == (0, 0)
    check_tree(tree, pg)


def test_p5_leaf_threshold_2(p5):
    g, c = p5
    tree, order, pg, _ = build_sep_decomposition(g, c, leaf_threshold=2)
    check_tree(tree, pg)
    root = tree.root
    fs, lv = tree.separator_range(root)
    assert lv - fs + 1 == 1
    assert order.vertex[fs] == 2
    kids = tree.children_of(root)
    assert len(kids) == 2
    for y in kids:
        lo, hi = tree.subgraph_range(y)
        assert hi - lo + 1 == 2 and len(tree.children_of(y)) == 0


def _separation_by_bfs(tree, pg):
    """For every node, deleting its separator splits G_X so that no component
    of the remainder meets two children."""
    h = _nx_undirected(pg)
    for x in range(tree.num_nodes):
        lo, hi = tree.subgraph_range(x)
        fs = tree.first_sep[x]
        rest = h.subgraph(range(lo, fs))
        owner = {}
        for i, y in enumerate(tree.children_of(x).tolist()):
            for v in range(tree.first_vertex[y], tree.last_vertex[y] + 1):
                owner[v] = i
        for comp in nx.connected_components(rest):
            assert len({owner[v] for v in comp}) == 1


def _membership_by_components(tree, pg):
    """V(G_Y) for each child Y is a union of components of G_X minus X."""
    h = _nx_undirected(pg)
    for x in range(tree.num_nodes):
        lo, _ = tree.subgraph_range(x)
        rest = h.subgraph(range(lo, tree.first_sep[x]))
        comp_of = {}
        for i, comp in enumerate(nx.connected_components(rest)):
            for v in comp:
                comp_of[v] = i
        for y in tree.children_of(x).tolist():
            ylo, yhi = tree.subgraph_range(y)
            comps = {comp_of[v] for v in range(ylo, yhi + 1)}
            members = {v for v, i in comp_of.items() if i in comps}
            assert members == set(range(ylo, yhi + 1))


def test_grid3_separation(grid3):
    g, c = grid3
    tree, _, pg, _ = build_sep_decomposition(g, c, leaf_threshold=1)
    check_tree(tree, pg)
    _separation_by_bfs(tree, pg)
    _membership_by_components(tree, pg)


def test_random_graph_decompositions(random_networks):
    for net in random_networks:
        check_tree(net.tree, net.graph)
        _separation_by_bfs(net.tree, net.graph)
        _membership_by_components(net.tree, net.graph)


def test_postorder_rank_property(random_networks):
    for net in random_networks[:10]:
        t = net.tree
        for y in range(t.num_nodes - 1):
            x = t.parent[y]
            assert t.last_vertex[y] < t.first_sep[x]


@settings(max_examples=20, deadline=None)
@given(st.integers(20, 300), st.integers(0, 10_000), st.sampled_from([1, 4, 32]))
def test_decomposition_invariants_random(n, seed, leaf):
    g, c = random_road_graph(n, seed=seed)
    tree, order, pg, _ = build_sep_decomposition(g, c, leaf_threshold=leaf)
    check_tree(tree, pg)
    assert np.array_equal(order.vertex[order.rank], np.arange(g.num_vertices))
    assert is_strongly_connected(pg)
    assert pg.num_edges == g.num_edges


def test_node_of_vertex(grid3):
    g, c = grid3
    tree, _, _, _ = build_sep_decomposition(g, c, leaf_threshold=1)
    assert node_of_vertex(tree, 8) == tree.root
    for v in range(9):
        x = node_of_vertex(tree, v)
        assert tree.first_sep[x] <= v <= tree.last_vertex[x]
        # linear scan oracle: the unique node whose separator range holds v
        hits = [y for y in range(tree.num_nodes) if tree.first_sep[y] <= v <= tree.last_vertex[y]]
        assert hits == [x]
    for x in range(tree.num_nodes):
        if len(tree.children_of(x)) == 0:
            lo, hi = tree.subgraph_range(x)
            assert all(node_of_vertex(tree, v) == x for v in range(lo, hi + 1))


def test_tree_serialization_round_trip():
    g, c = random_road_graph(300, seed=11)
    tree, order, pg, _ = build_sep_decomposition(g, c, leaf_threshold=8)
    data = tree_to_bytes(tree)
    assert data[:4] == b"SDT1"
    back = tree_from_bytes(data)
    for field in ("parent", "child_first", "children", "first_vertex", "last_vertex",
                  "first_sep", "vertex_node"):
        assert np.array_equal(getattr(back, field), getattr(tree, field)), field
    assert np.array_equal(order_from_bytes(order_to_bytes(order)).rank, order.rank)


def test_tree_rejects_bad_magic():
    with pytest.raises(ValueError):
        tree_from_bytes(b"XXXX" + bytes(8))


def test_decomposition_deterministic():
    g, c = random_road_graph(400, seed=9)
    a = build_sep_decomposition(g, c, 16)
    b = build_sep_decomposition(g, c, 16)
    assert tree_to_bytes(a[0]) == tree_to_bytes(b[0])
    assert np.array_equal(a[1].rank, b[1].rank)


def test_grid_fixture_whole_when_threshold_large():
    g, c = grid_graph(3, 3)
    tree, _, _, _ = build_sep_decomposition(g, c, leaf_threshold=32)
    assert tree.num_nodes == 1
    g5, c5 = path_graph(5)
    assert build_sep_decomposition(g5, c5, leaf_threshold=5)[0].num_nodes == 1
