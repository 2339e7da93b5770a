"""Small fixtures and synthetic road-like graphs for tests and experiments."""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from cchknn.graph import Coordinates, Graph, largest_scc


def _bidirected(n, pairs, lengths) -> Graph:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lengths = np.asarray(lengths, dtype=np.int64)
    return Graph.from_edges(
        n,
        np.r_[pairs[:, 0], pairs[:, 1]],
        np.r_[pairs[:, 1], pairs[:, 0]],
        np.r_[lengths, lengths],
    )


def path_graph(n: int = 5, length: int = 1):
    """Bidirected path 0-1-...-(n-1) laid out west to east (P5 for n=5)."""
    pairs = [(i, i + 1) for i in range(n - 1)]
    g = _bidirected(n, pairs, [length] * len(pairs))
    c = Coordinates(np.arange(n, dtype=np.int64) * 1000, np.zeros(n, dtype=np.int64))
    return g, c


def grid_graph(rows: int = 3, cols: int = 3, length: int = 1):
    """Bidirected grid, row-major ids, unit lengths by default (GRID3 for 3x3)."""
    pairs = []
    for i in range(rows):
        for j in range(cols):
            v = i * cols + j
            if j + 1 < cols:
                pairs.append((v, v + 1))
            if i + 1 < rows:
                pairs.append((v, v + cols))
    g = _bidirected(rows * cols, pairs, [length] * len(pairs))
    x = np.tile(np.arange(cols, dtype=np.int64), rows) * 1000
    y = np.repeat(np.arange(rows, dtype=np.int64), cols) * 1000
    return g, Coordinates(x, y)


def random_road_graph(n: int, seed: int, one_way: float = 0.1, drop: float = 0.2):
    """Delaunay triangulation of random points with thinned edges, travel-time
    lengths and some one-way streets, reduced to its largest SCC."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    tri = Delaunay(pts)
    simplices = tri.simplices
    edges = np.concatenate([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [0, 2]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    edges = edges[rng.random(len(edges)) >= drop]
    length = np.linalg.norm(pts[edges[:, 0]] - pts[edges[:, 1]], axis=1)
    length = np.maximum(1, np.round(length * 1e4 * rng.uniform(1.0, 2.0, len(edges)))).astype(np.int64)
    oneway = rng.random(len(edges)) < one_way
    flip = rng.random(len(edges)) < 0.5
    a = np.where(flip, edges[:, 1], edges[:, 0])
    b = np.where(flip, edges[:, 0], edges[:, 1])
    tails = np.r_[a, b[~oneway]]
    heads = np.r_[b, a[~oneway]]
    weights = np.r_[length, length[~oneway]]
    g = Graph.from_edges(n, tails, heads, weights)
    c = Coordinates(np.round(pts[:, 0] * 1e6).astype(np.int64), np.round(pts[:, 1] * 1e6).astype(np.int64))
    g, c, _ = largest_scc(g, c)
    return g, c


def road_grid(rows: int, cols: int, subdivide: int = 3, seed: int = 0, drop: float = 0.1,
              one_way: float = 0.05):
    """City-like grid of intersections whose roads are chains of ``subdivide``
    interior vertices. Random roads are removed, a few are one-way, and lengths
    vary per segment. Reduced to the largest SCC.
    """
    rng = np.random.default_rng(seed)
    inter = rows * cols
    xs = [np.tile(np.arange(cols, dtype=float), rows)]
    ys = [np.repeat(np.arange(rows, dtype=float), cols)]
    roads = []
    for i in range(rows):
        for j in range(cols):
            v = i * cols + j
            if j + 1 < cols:
                roads.append((v, v + 1))
            if i + 1 < rows:
                roads.append((v, v + cols))
    roads = np.array(roads, dtype=np.int64)
    roads = roads[rng.random(len(roads)) >= drop]
    nroads = len(roads)
    k = subdivide
    # interior vertex ids: inter + r * k + j
    mids = inter + np.arange(nroads * k, dtype=np.int64).reshape(nroads, k)
    ax, ay = xs[0][roads[:, 0]], ys[0][roads[:, 0]]
    bx, by = xs[0][roads[:, 1]], ys[0][roads[:, 1]]
    frac = np.arange(1, k + 1) / (k + 1)
    xs.append((ax[:, None] + (bx - ax)[:, None] * frac).ravel())
    ys.append((ay[:, None] + (by - ay)[:, None] * frac).ravel())
    chain = np.concatenate([roads[:, :1], mids, roads[:, 1:]], axis=1)
    seg_a = chain[:, :-1].ravel()
    seg_b = chain[:, 1:].ravel()
    speed = rng.choice([1.0, 1.0, 1.0, 0.5, 0.33], size=nroads)  # arterials are faster
    seg_len = np.maximum(1, np.round(rng.uniform(80, 120, len(seg_a)) * np.repeat(speed, k + 1))).astype(np.int64)
    oneway = np.repeat(rng.random(nroads) < one_way, k + 1)
    tails = np.r_[seg_a, seg_b[~oneway]]
    heads = np.r_[seg_b, seg_a[~oneway]]
    weights = np.r_[seg_len, seg_len[~oneway]]
    n = inter + nroads * k
    g = Graph.from_edges(n, tails, heads, weights)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    jitter = rng.uniform(-0.05, 0.05, (2, n))
    c = Coordinates(np.round((x + jitter[0]) * 1e4).astype(np.int64),
                    np.round((y + jitter[1]) * 1e4).astype(np.int64))
    g, c, _ = largest_scc(g, c)
    return g, c
