import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cchknn.baselines import ine_knn
from cchknn.cch import forward_elim_search, reset_forward
from cchknn.knn import (
    KnnHeap,
    boundary_of,
    build_target_index,
    dist_to_subgraph,
    knn_query,
    targets_in_range,
)
from cchknn.network import build_network
from cchknn.synth import random_road_graph
from oracles import boundary, knn_brute, scipy_distances


def test_prefix_example():
    idx = build_target_index([1, 3], 5)
    assert idx.prefix.tolist() == [0, 0, 1, 1, 2, 2]
    assert idx.targets.tolist() == [1, 3]


def test_prefix_all_vertices():
    assert build_target_index(range(7), 7).prefix.tolist() == list(range(8))


def test_duplicates_collapse():
    idx = build_target_index([4, 1, 4, 1], 6)
    assert idx.targets.tolist() == [1, 4]
    assert idx.num_targets == 2


@pytest.mark.parametrize("bad", [[], [-1], [5]])
def test_index_rejects_bad_targets(bad):
    with pytest.raises(ValueError):
        build_target_index(bad, 5)


@given(st.integers(1, 40).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.integers(0, n - 1), min_size=1))))
def test_range_counts_match_linear_scan(args):
    n, targets = args
    idx = build_target_index(sorted(targets), n)
    assert idx.prefix[0] == 0 and idx.prefix[-1] == len(targets)
    assert np.all(np.diff(idx.prefix) >= 0)
    for lo in range(n):
        for hi in range(lo, n):
            count, sl = targets_in_range(idx, lo, hi)
            scan = [t for t in sorted(targets) if lo <= t <= hi]
            assert count == len(scan) and sl.tolist() == scan


def test_range_edge_cases():
    idx = build_target_index([2, 5], 8)
    assert targets_in_range(idx, 0, 7)[0] == 2
    count, sl = targets_in_range(idx, 3, 4)
    assert count == 0 and len(sl) == 0
    with pytest.raises(IndexError):
        targets_in_range(idx, 3, 8)


def test_heap_bound():
    h = KnnHeap(2)
    assert h.bound() > 10**9
    for t, d in [(5, 9), (6, 3), (7, 4), (8, 3)]:
        h.offer(t, d)
    assert [d for _, d in h.sorted()] == [3, 3]


# --- boundaries and subgraph distances --------------------------------------------------


@pytest.fixture(scope="module")
def p5_net(p5):
    return build_network(*p5, leaf_threshold=2)


def test_p5_boundary(p5_net):
    net = p5_net
    # node 0 holds original {0, 1}; the root separator is original vertex 2
    x = 0
    assert net.to_original(range(*np.add(net.tree.subgraph_range(x), (0, 1)))).tolist() == [0, 1]
    b = boundary_of(net.tree, x, net.cch, net.graph)
    assert net.to_original(b.vertices).tolist() == [2]
    assert b.offsets.tolist() == [1]


def test_p5_dist_to_subgraph(p5_net):
    net = p5_net
    x = 1  # original {3, 4}
    assert net.to_original(range(2, 4)).tolist() == [3, 4]
    ctx = net.context()
    s = int(net.to_rank([0])[0])
    forward_elim_search(ctx, net.cch, s)
    assert dist_to_subgraph(ctx, net.cch, net.tree, x, "exact", net.offsets) == 3
    assert dist_to_subgraph(ctx, net.cch, net.tree, x, "lower_bound") == 2
    reset_forward(ctx, net.cch, s)
    assert ctx.is_clean()


def test_exact_mode_needs_offsets(p5_net):
    ctx = p5_net.context()
    with pytest.raises(ValueError):
        dist_to_subgraph(ctx, p5_net.cch, p5_net.tree, 0, "exact")


def _check_boundaries(net):
    t, h, g = net.tree, net.cch, net.graph
    for x in range(t.num_nodes - 1):
        lo, hi = t.subgraph_range(x)
        b = boundary_of(t, x, h, g)
        assert set(b.vertices.tolist()) == boundary(g, lo, hi)
        assert b.lowest == h.parent[hi]


def test_boundaries_grid3(grid3):
    _check_boundaries(build_network(*grid3, leaf_threshold=1))


def test_boundaries_random(random_networks):
    for net in random_networks[:15]:
        _check_boundaries(net)


def _check_subgraph_distances(net, pairs):
    t, h = net.tree, net.cch
    ctx = net.context()
    dist = scipy_distances(net.graph, np.arange(net.num_vertices))
    for s, x in pairs:
        lo, hi = t.subgraph_range(x)
        if lo <= s <= hi:
            continue
        forward_elim_search(ctx, h, s)
        exact = dist_to_subgraph(ctx, h, t, x, "exact", net.offsets)
        lower = dist_to_subgraph(ctx, h, t, x, "lower_bound")
        reset_forward(ctx, h, s)
        truth = dist[s, lo:hi + 1].min()
        assert exact == truth
        assert 0 <= lower <= truth
    assert ctx.is_clean()


def test_subgraph_distance_grid3_all_pairs(grid3):
    net = build_network(*grid3, leaf_threshold=1)
    pairs = [(s, x) for s in range(9) for x in range(net.tree.num_nodes - 1)]
    _check_subgraph_distances(net, pairs)


def test_subgraph_distance_random(random_networks):
    rng = np.random.default_rng(7)
    for net in random_networks[:10]:
        pairs = zip(rng.integers(0, net.num_vertices, 30).tolist(),
                    rng.integers(0, net.tree.num_nodes - 1, 30).tolist())
        _check_subgraph_distances(net, pairs)


# --- queries --------------------------------------------------------------------------------


def _query(net, ctx, targets, s, k, **kw):
    idx = build_target_index(targets, net.num_vertices)
    return knn_query(ctx, net.cch, net.tree, idx, s, k, offsets=net.offsets, **kw)


def test_p5_query(p5_net):
    net = p5_net
    ctx = net.context()
    targets = net.to_rank([0, 4])
    res = _query(net, ctx, targets, int(net.to_rank([1])[0]), 1)
    assert net.to_original(res.targets).tolist() == [0] and res.distances == [1]


def test_self_target(random_networks):
    net = random_networks[2]
    ctx = net.context()
    for s in (0, 17, net.num_vertices - 1):
        res = _query(net, ctx, [s], s, 1)
        assert res.pairs() == [(s, 0)]


def test_k_larger_than_targets(random_networks):
    net = random_networks[2]
    ctx = net.context()
    res = _query(net, ctx, [3, 9, 11], 0, 8)
    assert sorted(res.targets) == [3, 9, 11]
    dist = scipy_distances(net.graph, [0])[0]
    assert res.distances == sorted(dist[[3, 9, 11]].tolist())


def test_invalid_k(random_networks):
    net = random_networks[2]
    with pytest.raises(ValueError):
        _query(net, net.context(), [1], 0, 0)


def test_results_are_sorted_with_true_distances(random_networks):
    net = random_networks[4]
    ctx = net.context()
    rng = np.random.default_rng(3)
    dist = scipy_distances(net.graph, np.arange(net.num_vertices))
    for _ in range(50):
        targets = rng.choice(net.num_vertices, 20, replace=False)
        s = int(rng.integers(0, net.num_vertices))
        res = _query(net, ctx, targets, s, 4)
        assert res.distances == sorted(res.distances)
        assert all(dist[s, t] == d for t, d in res.pairs())
        assert set(res.targets) <= set(targets.tolist())


def test_prune_soundness(random_networks):
    """Every pruned child holds no target closer than the final k-th distance."""
    rng = np.random.default_rng(11)
    pruned_seen = 0
    for net in random_networks[:20]:
        ctx = net.context()
        dist = scipy_distances(net.graph, np.arange(net.num_vertices))
        idx_sizes = [5, 40, net.num_vertices // 3]
        for size in idx_sizes:
            targets = rng.choice(net.num_vertices, min(size, net.num_vertices), replace=False)
            s = int(rng.integers(0, net.num_vertices))
            for k in (1, 4):
                res = _query(net, ctx, targets, s, k, recursion_threshold=2)
                kth = res.distances[-1]
                tset = np.sort(targets)
                for x, lower in res.pruned:
                    lo, hi = net.tree.subgraph_range(x)
                    inside = tset[(tset >= lo) & (tset <= hi)]
                    assert lower >= kth
                    assert dist[s, inside].min() >= kth
                    pruned_seen += 1
    assert pruned_seen > 0


@settings(max_examples=40, deadline=None)
@given(st.integers(30, 250), st.integers(0, 5000), st.data())
def test_oracle_equivalence_random(n, seed, data):
    g, c = random_road_graph(n, seed=seed)
    leaf = data.draw(st.sampled_from([1, 4, 16]))
    net = build_network(g, c, leaf_threshold=leaf)
    nv = net.num_vertices
    size = data.draw(st.integers(1, nv))
    targets = data.draw(st.lists(st.integers(0, nv - 1), min_size=size, max_size=size))
    s = data.draw(st.integers(0, nv - 1))
    k = data.draw(st.sampled_from([1, 4, 8]))
    threshold = data.draw(st.sampled_from([0, 1, 8, 1000]))
    ctx = net.context()
    row = scipy_distances(net.graph, [s])[0]
    for mode in ("lower_bound", "exact"):
        res = _query(net, ctx, targets, s, k, recursion_threshold=threshold, mode=mode)
        assert res.distances == knn_brute(row, targets, k)
    assert ine_knn(net.graph, s, targets, k).distances == knn_brute(row, targets, k)
    assert ctx.is_clean()


def test_threshold_changes_work_not_result(random_networks):
    net = random_networks[5]
    ctx = net.context()
    targets = np.arange(0, net.num_vertices, 3)
    results, searches = [], []
    for threshold in (0, 8, 10**6):
        res = _query(net, ctx, targets, 5, 4, recursion_threshold=threshold)
        results.append(res.distances)
        searches.append(res.reverse_searches)
    assert results[0] == results[1] == results[2]
    # with an enormous threshold the root examines every target
    assert searches[2] == len(targets)
    assert searches[1] < searches[2]
