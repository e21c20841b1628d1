"""Expander decompositions of dynamic edge streams."""

from .graph import BoundaryLinkedView, MultiGraph, Partition, WeightedGraph

__all__ = ["BoundaryLinkedView", "MultiGraph", "Partition", "WeightedGraph"]
__version__ = "0.1.0"
