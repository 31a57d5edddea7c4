"""Relevance measures for heterogeneous graphs: GSim (CP-GNN+) and classic baselines."""

from .hetgraph import GraphError, HeteroGraph, LabelTable, MetaPath, load_graph, split_labels

__all__ = ["GraphError", "HeteroGraph", "LabelTable", "MetaPath", "load_graph", "split_labels"]
__version__ = "0.1.0"
