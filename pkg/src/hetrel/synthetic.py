"""Small generated graphs: planted communities and random typed graphs."""
from __future__ import annotations

import numpy as np

from .hetgraph import HeteroGraph

# (relation, source type, target type, expected intra-community links per source node)
PLANTED_SCHEMA = (
    ("writes", "A", "P", 4.0),
    ("about", "P", "S", 3.0),
    ("in", "P", "V", 2.0),
)
PLANTED_SIZES = {"P": 80, "A": 60, "S": 30, "V": 30}


def planted_communities(
    seed: int = 0,
    sizes: dict[str, int] | None = None,
    communities: int = 2,
    inter_ratio: float = 0.05,
    labeled_types: tuple[str, ...] = ("P",),
) -> HeteroGraph:
    """Stochastic block model over typed nodes.

    Every node gets a community (balanced, round-robin); each relation links a
    pair with probability ``p_in`` inside a community and ``inter_ratio * p_in``
    across.  Nodes of ``labeled_types`` carry their community as label.
    """
    rng = np.random.default_rng(seed)
    sizes = dict(PLANTED_SIZES if sizes is None else sizes)
    nodes, comm = [], {}
    for t, n in sizes.items():
        for i in range(n):
            v = f"{t.lower()}{i}"
            nodes.append((v, t))
            comm[v] = i % communities
    by_type = {t: [v for v, tt in nodes if tt == t] for t in sizes}
    edges = []
    for rel, s, t, per_node in PLANTED_SCHEMA:
        if s not in sizes or t not in sizes:
            continue
        p_in = min(1.0, per_node * communities / sizes[t])
        for u in by_type[s]:
            for v in by_type[t]:
                p = p_in if comm[u] == comm[v] else inter_ratio * p_in
                if rng.random() < p:
                    edges.append((u, rel, v))
    labels = {v: f"c{comm[v]}" for v, t in nodes if t in labeled_types}
    return HeteroGraph(nodes, edges, undirected=True, labels=labels)


def random_graph(rng: np.random.Generator, n_min: int = 2, n_max: int = 12, n_types: int = 2, p: float | None = None) -> HeteroGraph:
    """Random undirected typed graph with at least one edge.

    Relation names are ``<src type><dst type>`` so signatures stay consistent.
    """
    n = int(rng.integers(n_min, n_max + 1))
    p = float(rng.uniform(0.2, 0.7)) if p is None else p
    types = [f"T{int(rng.integers(n_types))}" for _ in range(n)]
    nodes = [(f"v{i}", types[i]) for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((f"v{i}", f"{types[i]}{types[j]}", f"v{j}"))
    if not edges:
        i, j = 0, 1
        edges.append((f"v{i}", f"{types[i]}{types[j]}", f"v{j}"))
    return HeteroGraph(nodes, edges, undirected=True)
