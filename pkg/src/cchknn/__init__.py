"""k-nearest-neighbor queries and travel demand generation on customizable
contraction hierarchies."""

from cchknn.graph import INF, Coordinates, Graph, ParseError

__all__ = ["INF", "Coordinates", "Graph", "ParseError"]
