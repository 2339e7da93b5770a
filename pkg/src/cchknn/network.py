"""Preprocessing + customization pipeline bundled into one object."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from cchknn.cch import CCH, SearchContext, contract, customize
from cchknn.graph import Coordinates, Graph, induced_subgraph, largest_scc, permute
from cchknn.knn import entry_offsets
from cchknn.partition import NestedDissectionOrder, SepDecompTree, build_sep_decomposition


@dataclass(frozen=True)
class Network:
    """A customized CCH with everything the queries need.

    ``graph`` and ``coords`` use rank ids. ``rank[v]`` maps an id of the original
    input to its rank, -1 for vertices dropped outside the largest SCC.
    """

    graph: Graph
    coords: Optional[Coordinates]
    tree: SepDecompTree
    cch: CCH
    offsets: np.ndarray
    rank: np.ndarray

    @property
    def num_vertices(self) -> int:
        return self.graph.num_vertices

    def context(self) -> SearchContext:
        return SearchContext(self.num_vertices)

    def with_metric(self, g: Graph) -> "Network":
        """Re-customize for new lengths on the same (rank-id) topology."""
        h = customize(self.cch, g)
        return Network(g, self.coords, self.tree, h, entry_offsets(h, self.tree, g), self.rank)

    def to_rank(self, original_ids) -> np.ndarray:
        r = self.rank[np.asarray(original_ids, dtype=np.int64)]
        if np.any(r < 0):
            raise ValueError("vertex was removed during preprocessing")
        return r

    def to_original(self, ranks) -> np.ndarray:
        inv = np.empty(self.num_vertices, dtype=np.int64)
        kept = np.flatnonzero(self.rank >= 0)
        inv[self.rank[kept]] = kept
        return inv[np.asarray(ranks, dtype=np.int64)]


def build_network(g: Graph, c: Coordinates, leaf_threshold: int = 32, balance: float = 0.3,
                  restrict_to_scc: bool = True) -> Network:
    n_orig = g.num_vertices
    if restrict_to_scc:
        g, c, old_ids = largest_scc(g, c)
    else:
        old_ids = np.arange(n_orig, dtype=np.int64)
    tree, order, pg, pc = build_sep_decomposition(g, c, leaf_threshold, balance)
    h = customize(contract(pg), pg)
    rank = np.full(n_orig, -1, dtype=np.int64)
    rank[old_ids] = order.rank
    return Network(pg, pc, tree, h, entry_offsets(h, tree, pg), rank)


def order_of(net: Network) -> NestedDissectionOrder:
    kept = np.flatnonzero(net.rank >= 0)
    rank = net.rank[kept]
    vertex = np.empty(len(kept), dtype=np.int64)
    vertex[rank] = np.arange(len(kept))
    return NestedDissectionOrder(rank, vertex)


def graph_in_rank_order(g: Graph, rank: np.ndarray) -> Graph:
    """Drop vertices without a rank and relabel the rest by rank."""
    rank = np.asarray(rank, dtype=np.int64)
    if g.num_vertices != len(rank):
        raise ValueError(f"graph has {g.num_vertices} vertices, the order covers {len(rank)}")
    kept = np.flatnonzero(rank >= 0)
    pg, _ = permute(induced_subgraph(g, kept), None, rank[kept])
    return pg
