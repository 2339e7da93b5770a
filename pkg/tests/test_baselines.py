import numpy as np
import pytest

from cchknn.baselines import bcch_query, bcch_select, ine_knn
from cchknn.cch import SearchContext, contract, customize, forward_elim_search, reset_forward
from cchknn.graph import INF, dijkstra
from cchknn.knn import build_target_index, knn_query
from cchknn.network import build_network
from oracles import knn_brute, scipy_distances


def _p5_identity(p5):
    g, _ = p5
    return g, customize(contract(g), g)


def test_ine_p5(p5):
    g, _ = p5
    assert sorted(ine_knn(g, 2, [0, 4], 2).distances) == [2, 2]


def test_ine_all_targets(random_networks):
    net = random_networks[0]
    for s in (0, 7, 30):
        assert ine_knn(net.graph, s, np.arange(net.num_vertices), 1).pairs() == [(s, 0)]


def test_ine_matches_per_target_dijkstra(random_networks):
    rng = np.random.default_rng(5)
    for i in range(50):
        net = random_networks[i % len(random_networks)]
        g = net.graph
        targets = rng.choice(g.num_vertices, int(rng.integers(1, 30)), replace=False)
        s = int(rng.integers(0, g.num_vertices))
        k = int(rng.choice([1, 4, 8]))
        per_target = sorted(int(dijkstra(g, s)[t]) for t in targets)[:k]
        assert ine_knn(g, s, targets, k).distances == per_target


def test_buckets_root_only(p5):
    _, h = _p5_identity(p5)
    b = bcch_select(h, [4])
    assert b.num_entries == 1 and b.bucket(4) == [(4, 0)]


def test_buckets_p5_path(p5):
    _, h = _p5_identity(p5)
    b = bcch_select(h, [0])
    assert [b.bucket(v) for v in range(5)] == [[(0, i)] for i in range(5)]


@pytest.mark.parametrize("stall", [False, True])
def test_bucket_entries_bound_distances(random_networks, stall):
    rng = np.random.default_rng(8)
    for net in random_networks[:10]:
        h = net.cch
        targets = rng.choice(net.num_vertices, 25, replace=False)
        b = bcch_select(h, targets, stall_on_demand=stall)
        dist = scipy_distances(net.graph, np.arange(net.num_vertices))
        for v in range(net.num_vertices):
            entries = b.bucket(v)
            assert entries == sorted(entries, key=lambda e: (e[1], e[0]))
            for t, y in entries:
                assert y >= dist[v, t]


def test_some_meeting_vertex_is_tight(random_networks):
    net = random_networks[6]
    h = net.cch
    rng = np.random.default_rng(9)
    targets = rng.choice(net.num_vertices, 15, replace=False)
    b = bcch_select(h, targets)
    ctx = net.context()
    dist = scipy_distances(net.graph, np.arange(net.num_vertices))
    for s in rng.integers(0, net.num_vertices, 20).tolist():
        forward_elim_search(ctx, h, s)
        for t in targets.tolist():
            best = min((ctx.forward[v] + y for v in h.root_path(s)
                        for tt, y in b.bucket(v) if tt == t and ctx.forward[v] < INF),
                       default=None)
            assert best == dist[s, t]
        reset_forward(ctx, h, s)


def test_stall_shrinks_buckets(random_networks):
    net = random_networks[7]
    targets = np.arange(net.num_vertices)
    plain = bcch_select(net.cch, targets)
    stalled = bcch_select(net.cch, targets, stall_on_demand=True)
    assert stalled.num_entries <= plain.num_entries


def test_bcch_self_and_all(random_networks):
    net = random_networks[1]
    ctx = net.context()
    b = bcch_select(net.cch, [12])
    assert bcch_query(ctx, net.cch, b, 12, 1).pairs() == [(12, 0)]
    targets = np.array([3, 40, 77, 90])
    b = bcch_select(net.cch, targets)
    dist = scipy_distances(net.graph, [5])[0]
    res = bcch_query(ctx, net.cch, b, 5, len(targets))
    assert sorted(res.targets) == targets.tolist()
    assert res.distances == sorted(dist[targets].tolist())


def test_three_way_agreement(grid3, random_networks):
    nets = [build_network(*grid3, leaf_threshold=1)] + random_networks[:20]
    rng = np.random.default_rng(13)
    for net in nets:
        ctx = net.context()
        n = net.num_vertices
        for _ in range(10):
            targets = rng.choice(n, int(rng.integers(1, n + 1)), replace=True)
            s = int(rng.integers(0, n))
            k = int(rng.choice([1, 4, 8]))
            row = scipy_distances(net.graph, [s])[0]
            expected = knn_brute(row, targets, k)
            idx = build_target_index(targets, n)
            assert knn_query(ctx, net.cch, net.tree, idx, s, k).distances == expected
            for stall in (False, True):
                b = bcch_select(net.cch, targets, stall_on_demand=stall)
                assert bcch_query(ctx, net.cch, b, s, k).distances == expected
            assert ine_knn(net.graph, s, targets, k).distances == expected


def test_bcch_rejects_empty(p5):
    _, h = _p5_identity(p5)
    with pytest.raises(ValueError):
        bcch_select(h, [])
    with pytest.raises(ValueError):
        bcch_query(SearchContext(5), h, bcch_select(h, [1]), 0, 0)
