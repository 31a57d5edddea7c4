"""Classic relevance measures and the brute-force random-walk oracles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .evaluation import RelevanceMatrix
from .hetgraph import (
    GraphError,
    HeteroGraph,
    MetaPath,
    augment_with_intermediates,
    intermediate_type,
    inverse_relation,
)

MAX_ENUMERATED_WALKS = 10**6
ENUMERATION_MAX_NODES = 15


@dataclass
class VisitDistribution:
    source: str
    length: int
    probabilities: dict[str, float]

    def total(self) -> float:
        return float(sum(self.probabilities.values()))

    def get(self, v: str) -> float:
        return self.probabilities.get(v, 0.0)


def transition_matrix(g: HeteroGraph, relation: str | None = None) -> sp.csr_matrix:
    """Row-stochastic ``D^-1 A`` over all relations, or over one relation.

    Rows of nodes without out-edges are all-zero: walk mass that reaches
    them is dropped.
    """
    if relation is None:
        src, dst = g.edge_src, g.edge_dst
    else:
        src, dst = g.relation_edges(relation)
    n = g.num_nodes
    a = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros(n), where=deg > 0)
    return sp.csr_matrix(sp.diags(inv) @ a)


def _visit_vector(g: HeteroGraph, v: str, k: int) -> np.ndarray:
    if k < 0:
        raise ValueError(f"walk length must be >= 0, got {k}")
    x = np.zeros(g.num_nodes)
    x[g._idx(v)] = 1.0
    pt = transition_matrix(g).T.tocsr()
    for _ in range(k):
        x = pt @ x
    return x


def rw_visit_prob(g: HeteroGraph, v: str, k: int) -> VisitDistribution:
    x = _visit_vector(g, v, k)
    probs = {g.node_ids[i]: float(x[i]) for i in np.flatnonzero(x)}
    return VisitDistribution(v, k, probs)


def enumerate_walks(g: HeteroGraph, v: str, k: int, cap: int = MAX_ENUMERATED_WALKS):
    """Yield every k-step walk from ``v`` as ``(node index path, probability)``.

    The probability of a walk is the product of ``1/out_degree`` over the
    nodes it leaves.
    """
    if k < 0:
        raise ValueError(f"walk length must be >= 0, got {k}")
    start = g._idx(v)
    deg = g.out_degrees()
    count = 0
    stack = [((start,), 1.0)]
    while stack:
        path, p = stack.pop()
        if len(path) == k + 1:
            count += 1
            if count > cap:
                raise OverflowError(f"more than {cap} walks of length {k} from {v!r}")
            yield path, p
            continue
        u = path[-1]
        for e in reversed(g._out[u]):
            stack.append((path + (int(g.edge_dst[e]),), p / deg[u]))


def _enumerated_distribution(g: HeteroGraph, v: str, k: int) -> np.ndarray:
    x = np.zeros(g.num_nodes)
    for path, p in enumerate_walks(g, v, k):
        x[path[-1]] += p
    return x


def prw_brute(g: HeteroGraph, vi: str, vj: str, two_k: int, method: str = "auto") -> float:
    """Probability that equal-length walks from ``vi`` and ``vj`` meet.

    Sums ``p(m | vi, k) * p(m | vj, k)`` over meeting nodes ``m`` with
    ``k = two_k / 2``.  ``method="enumerate"`` builds the visit
    probabilities by listing every walk; ``"matrix"`` by repeated
    transition products; ``"auto"`` enumerates on graphs of at most 15 nodes.
    """
    if two_k < 0 or two_k % 2:
        raise ValueError(f"pair-wise walk length must be even and >= 0, got {two_k}")
    k = two_k // 2
    g._idx(vi), g._idx(vj)
    if method == "auto":
        method = "enumerate" if g.num_nodes <= ENUMERATION_MAX_NODES else "matrix"
    if method == "enumerate":
        pi, pj = _enumerated_distribution(g, vi, k), _enumerated_distribution(g, vj, k)
    elif method == "matrix":
        pi, pj = _visit_vector(g, vi, k), _visit_vector(g, vj, k)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(pi @ pj)


def gnn_identity_embeddings(g: HeteroGraph, k: int) -> np.ndarray:
    """Node representations of a k-layer GNN with every learnable piece set to identity.

    Initial embedding is the one-hot identity, propagation is ``D^-1 A``,
    weights and activation are identity: ``H = sigma(L sigma(L Z W) W) ...``.
    """
    if k < 1:
        raise ValueError(f"need at least one layer, got {k}")
    n = g.num_nodes
    lap = transition_matrix(g).toarray()
    z = np.eye(n)
    w = np.eye(n)
    act = lambda x: x  # noqa: E731
    h = z
    for _ in range(k):
        h = act(lap @ h @ w)
    return h


def gnn_identity_relevance(g: HeteroGraph, vi: str, vj: str, k: int) -> float:
    h = gnn_identity_embeddings(g, k)
    return float(h[g._idx(vi)] @ h[g._idx(vj)])


def intermediate_invariance_gap(g: HeteroGraph, k: int) -> float:
    """Largest |k-layer relevance on ``g`` - 2k-layer relevance after adding intermediates|.

    Taken over pairs of original nodes; the augmentation gives every directed
    edge its own intermediate node.
    """
    aug = augment_with_intermediates(g, per_direction=True)
    h = gnn_identity_embeddings(g, k)
    h_aug = gnn_identity_embeddings(aug, 2 * k)
    rows = [aug.index[v] for v in g.node_ids]
    return float(np.max(np.abs(h @ h.T - h_aug[rows] @ h_aug[rows].T)))


def prw_matrix(g: HeteroGraph, two_k: int) -> RelevanceMatrix:
    """Pair-wise random-walk relevance for every node pair."""
    if two_k < 0 or two_k % 2:
        raise ValueError(f"pair-wise walk length must be even and >= 0, got {two_k}")
    h = np.eye(g.num_nodes) if two_k == 0 else gnn_identity_embeddings(g, two_k // 2)
    return RelevanceMatrix(list(g.node_ids), h @ h.T)


# -- HeteSim -----------------------------------------------------------------


def _split_metapath(g: HeteroGraph, p: MetaPath) -> tuple[HeteroGraph, MetaPath]:
    """Make the path even-length by routing the middle relation through its edge nodes."""
    if len(p) % 2 == 0:
        return g, p
    m = len(p) // 2
    mid = p.relations[m]
    listed = {r for _, r, _ in g.listed_edges}
    if mid in listed:
        base, halves = mid, (f"{mid}.src", f"{mid}.dst")
    elif inverse_relation(mid) in listed:
        base = inverse_relation(mid)
        halves = (inverse_relation(f"{base}.dst"), inverse_relation(f"{base}.src"))
    else:
        raise GraphError(f"meta-path relation {mid!r} not in graph")
    aug = augment_with_intermediates(g)
    types = p.node_types[: m + 1] + (intermediate_type(base),) + p.node_types[m + 1 :]
    rels = p.relations[:m] + halves + p.relations[m + 1 :]
    return aug, MetaPath(types, rels)


def _reach_matrix(g: HeteroGraph, relations) -> sp.csr_matrix:
    n = g.num_nodes
    out = sp.identity(n, format="csr")
    for r in relations:
        out = out @ transition_matrix(g, r)
    return sp.csr_matrix(out)


def hetesim_matrix(g: HeteroGraph, p: MetaPath, normalized: bool = True) -> RelevanceMatrix:
    """HeteSim between all nodes of the path's source type and all nodes of its target type."""
    g.check_metapath(p)
    src_nodes = g.nodes_of_type(p.node_types[0])
    dst_nodes = g.nodes_of_type(p.node_types[-1])
    ga, pa = _split_metapath(g, p)
    half = len(pa) // 2
    left = _reach_matrix(ga, pa.relations[:half])
    right = _reach_matrix(ga, pa.reversed().relations[: len(pa) - half])
    li = [ga.index[v] for v in src_nodes]
    ri = [ga.index[v] for v in dst_nodes]
    lm = left[li].toarray()
    rm = right[ri].toarray()
    scores = lm @ rm.T
    if normalized:
        ln = np.linalg.norm(lm, axis=1)
        rn = np.linalg.norm(rm, axis=1)
        denom = np.outer(ln, rn)
        scores = np.divide(scores, denom, out=np.zeros_like(scores), where=denom > 0)
        if p.reversed() == p:
            # both halves of a symmetric path give v the same reach vector: cosine 1 exactly
            idx = np.flatnonzero(ln > 0)
            scores[idx, idx] = 1.0
    return RelevanceMatrix(src_nodes, scores, col_ids=dst_nodes)


def hetesim(g: HeteroGraph, vi: str, vj: str, p: MetaPath, normalized: bool = True) -> float:
    for v, want in ((vi, p.node_types[0]), (vj, p.node_types[-1])):
        if g.type_of(v) != want:
            raise GraphError(f"node {v!r} has type {g.type_of(v)!r}, meta-path expects {want!r}")
    m = hetesim_matrix(g, p, normalized)
    return m.score(vi, vj)


# -- SimRank -----------------------------------------------------------------


def simrank(g: HeteroGraph, decay: float = 0.8, iterations: int = 10) -> RelevanceMatrix:
    """Type-blind SimRank over in-neighbours, iterated ``iterations`` times from the identity."""
    if not 0 < decay < 1:
        raise ValueError(f"decay must lie in (0, 1), got {decay}")
    if iterations < 1:
        raise ValueError("need at least one iteration")
    n = g.num_nodes
    a = sp.csr_matrix((np.ones(g.num_edges), (g.edge_src, g.edge_dst)), shape=(n, n)).toarray()
    indeg = a.sum(axis=0)
    w = np.divide(a, indeg, out=np.zeros_like(a), where=indeg > 0)
    s = np.eye(n)
    for _ in range(iterations):
        s = decay * (w.T @ s @ w)
        np.fill_diagonal(s, 1.0)
    s = (s + s.T) / 2
    return RelevanceMatrix(list(g.node_ids), s)
