"""Typed graph model, TSV ingestion, label splits and intermediate-node augmentation."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

INVERSE_SUFFIX = "^-1"
UNLABELED = "-"


class GraphError(ValueError):
    """Raised for malformed graph input or inconsistent graph structure."""


def inverse_relation(name: str) -> str:
    if name.endswith(INVERSE_SUFFIX):
        return name[: -len(INVERSE_SUFFIX)]
    return name + INVERSE_SUFFIX


@dataclass(frozen=True)
class MetaPath:
    node_types: tuple[str, ...]
    relations: tuple[str, ...]

    def __post_init__(self):
        if len(self.relations) != len(self.node_types) - 1:
            raise GraphError(
                f"meta-path needs {len(self.node_types) - 1} relations, got {len(self.relations)}"
            )

    def __len__(self) -> int:
        return len(self.relations)

    def reversed(self) -> "MetaPath":
        return MetaPath(
            tuple(reversed(self.node_types)),
            tuple(inverse_relation(r) for r in reversed(self.relations)),
        )

    def __str__(self) -> str:
        parts = [self.node_types[0]]
        for rel, typ in zip(self.relations, self.node_types[1:]):
            parts += [rel, typ]
        return "-".join(parts)

    @classmethod
    def parse(cls, text: str) -> "MetaPath":
        """Parse ``A-writes-P-writes^-1-A``."""
        raw = text.strip().split("-")
        tokens: list[str] = []
        for tok in raw:
            # "^-1" was split into "...^" and "1"
            if tok == "1" and tokens and tokens[-1].endswith("^"):
                tokens[-1] += "-1"
            else:
                tokens.append(tok)
        if len(tokens) < 1 or len(tokens) % 2 == 0 or any(not t for t in tokens):
            raise GraphError(f"malformed meta-path: {text!r}")
        return cls(tuple(tokens[0::2]), tuple(tokens[1::2]))


class HeteroGraph:
    """Immutable typed multigraph.

    ``listed_edges`` are the edges as given by the caller; for an undirected
    graph each listed edge ``(u, r, v)`` is stored as the two directed edges
    ``u -r-> v`` and ``v -r^-1-> u``.  Nodes are densely indexed in insertion order.
    """

    def __init__(
        self,
        nodes: Sequence[tuple[str, str]],
        edges: Iterable[tuple[str, str, str]],
        undirected: bool = True,
        labels: dict[str, str] | None = None,
        types: Sequence[str] = (),
    ):
        self.undirected = undirected
        self.node_ids: list[str] = []
        self.index: dict[str, int] = {}
        # declared types may have no nodes
        self.types: list[str] = list(dict.fromkeys(types))
        type_index: dict[str, int] = {t: i for i, t in enumerate(self.types)}
        node_type = []
        for nid, typ in nodes:
            if nid in self.index:
                raise GraphError(f"duplicate node id {nid!r}")
            self.index[nid] = len(self.node_ids)
            self.node_ids.append(nid)
            if typ not in type_index:
                type_index[typ] = len(self.types)
                self.types.append(typ)
            node_type.append(type_index[typ])
        self.type_index = type_index
        self.node_type = np.asarray(node_type, dtype=np.int64)
        self.labels: dict[str, str] = dict(labels or {})
        for nid in self.labels:
            if nid not in self.index:
                raise GraphError(f"label for unknown node {nid!r}")

        self.listed_edges: list[tuple[str, str, str]] = []
        self.relations: list[str] = []
        self.relation_index: dict[str, int] = {}
        self.signature: dict[str, tuple[str, str]] = {}
        src, rel, dst = [], [], []
        for u, r, v in edges:
            self.listed_edges.append((u, r, v))
            directed = [(u, r, v)]
            if undirected:
                directed.append((v, inverse_relation(r), u))
            for a, rr, b in directed:
                self._check_edge(a, rr, b)
                src.append(self.index[a])
                rel.append(self.relation_index[rr])
                dst.append(self.index[b])
        self.edge_src = np.asarray(src, dtype=np.int64)
        self.edge_rel = np.asarray(rel, dtype=np.int64)
        self.edge_dst = np.asarray(dst, dtype=np.int64)

        if len(self.types) + len(self.relations) <= 2:
            raise GraphError(
                "a heterogeneous graph needs |node types| + |relations| > 2, got "
                f"{len(self.types)} + {len(self.relations)}"
            )

        n = len(self.node_ids)
        self._out: list[list[int]] = [[] for _ in range(n)]
        self._in: list[list[int]] = [[] for _ in range(n)]
        for e, (a, b) in enumerate(zip(self.edge_src, self.edge_dst)):
            self._out[a].append(e)
            self._in[b].append(e)

    def _check_edge(self, u: str, r: str, v: str) -> None:
        for x in (u, v):
            if x not in self.index:
                raise GraphError(f"edge ({u}, {r}, {v}) references unknown node {x!r}")
        sig = (self.types[self.node_type[self.index[u]]], self.types[self.node_type[self.index[v]]])
        if r not in self.relation_index:
            self.relation_index[r] = len(self.relations)
            self.relations.append(r)
            self.signature[r] = sig
        elif self.signature[r] != sig:
            raise GraphError(
                f"relation {r!r} used with signature {sig}, previously {self.signature[r]}"
            )

    # -- basic queries -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        """Number of stored directed edges."""
        return len(self.edge_src)

    def _idx(self, v: str) -> int:
        try:
            return self.index[v]
        except KeyError:
            raise GraphError(f"unknown node {v!r}") from None

    def type_of(self, v: str) -> str:
        return self.types[self.node_type[self._idx(v)]]

    def out_degree(self, v: str) -> int:
        return len(self._out[self._idx(v)])

    def in_degree(self, v: str) -> int:
        return len(self._in[self._idx(v)])

    def out_degrees(self) -> np.ndarray:
        return np.bincount(self.edge_src, minlength=self.num_nodes)

    def neighbors(self, v: str, r: str | None = None) -> list[str]:
        edges = self._out[self._idx(v)]
        if r is not None:
            if r not in self.relation_index:
                raise GraphError(f"unknown relation {r!r}")
            rid = self.relation_index[r]
            edges = [e for e in edges if self.edge_rel[e] == rid]
        return [self.node_ids[self.edge_dst[e]] for e in edges]

    def nodes_of_type(self, a: str) -> list[str]:
        if a not in self.type_index:
            raise GraphError(f"unknown node type {a!r}")
        t = self.type_index[a]
        return [nid for nid, tt in zip(self.node_ids, self.node_type) if tt == t]

    def relation_edges(self, r: str) -> tuple[np.ndarray, np.ndarray]:
        """(src, dst) index arrays of the directed edges of relation ``r``."""
        if r not in self.relation_index:
            raise GraphError(f"unknown relation {r!r}")
        mask = self.edge_rel == self.relation_index[r]
        return self.edge_src[mask], self.edge_dst[mask]

    def check_metapath(self, p: MetaPath) -> None:
        for i, r in enumerate(p.relations):
            if r not in self.signature:
                raise GraphError(f"meta-path relation {r!r} not in graph")
            want = (p.node_types[i], p.node_types[i + 1])
            if self.signature[r] != want:
                raise GraphError(
                    f"meta-path step {p.node_types[i]}-{r}-{p.node_types[i + 1]} "
                    f"does not match relation signature {self.signature[r]}"
                )

    def labeled_nodes(self) -> list[str]:
        return [nid for nid in self.node_ids if nid in self.labels]

    def __repr__(self) -> str:
        kind = "undirected" if self.undirected else "directed"
        return (
            f"HeteroGraph({self.num_nodes} nodes, {len(self.listed_edges)} {kind} edges, "
            f"types={self.types}, relations={self.relations})"
        )


# -- file IO -------------------------------------------------------------


def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line.split("\t")


def load_graph(nodes_path, edges_path, undirected: bool = True) -> HeteroGraph:
    nodes_path, edges_path = Path(nodes_path), Path(edges_path)
    nodes, labels = [], {}
    for lineno, cols in _data_lines(nodes_path):
        if len(cols) != 3 or not cols[0] or not cols[1]:
            raise GraphError(f"{nodes_path}:{lineno}: expected node_id<TAB>type<TAB>label")
        nid, typ, lab = cols
        nodes.append((nid, typ))
        if lab != UNLABELED:
            labels[nid] = lab
    edges = []
    for lineno, cols in _data_lines(edges_path):
        if len(cols) != 3 or not all(cols):
            raise GraphError(f"{edges_path}:{lineno}: expected src_id<TAB>relation<TAB>dst_id")
        edges.append(tuple(cols))
    known = {nid for nid, _ in nodes}
    # report the offending line before HeteroGraph sees it
    for lineno, cols in _data_lines(edges_path):
        for x in (cols[0], cols[2]):
            if x not in known:
                raise GraphError(f"{edges_path}:{lineno}: unknown node {x!r}")
    try:
        return HeteroGraph(nodes, edges, undirected=undirected, labels=labels)
    except GraphError as exc:
        raise GraphError(f"{edges_path}: {exc}") from None


def save_graph(g: HeteroGraph, nodes_path, edges_path) -> None:
    with open(nodes_path, "w", encoding="utf-8") as fh:
        for nid, t in zip(g.node_ids, g.node_type):
            fh.write(f"{nid}\t{g.types[t]}\t{g.labels.get(nid, UNLABELED)}\n")
    with open(edges_path, "w", encoding="utf-8") as fh:
        for u, r, v in g.listed_edges:
            fh.write(f"{u}\t{r}\t{v}\n")


# -- label splits ----------------------------------------------------------

SPLITS = ("train", "val", "test")


@dataclass
class LabelTable:
    labels: dict[str, str]
    split: dict[str, str] = field(default_factory=dict)

    def nodes_in(self, part: str) -> list[str]:
        return [v for v, s in self.split.items() if s == part]

    def positives(self, v: str) -> set[str]:
        lab = self.labels[v]
        return {u for u, l in self.labels.items() if l == lab}


def split_labels(labels: dict[str, str], seed: int, node_types: dict[str, str] | None = None) -> LabelTable:
    """Stratified 25/25/50 train/val/test split per labeled node type.

    Per type with ``n`` labeled nodes, train gets ``floor(n/4)``, val gets
    ``n/4`` rounded half up and test the remainder, so each part is within
    one node of its share.  Within a type, nodes are ordered by their
    fractional position inside their (shuffled) label group so every split
    sees the labels in proportion.
    """
    rng = np.random.default_rng(seed)
    groups: dict[str, list[str]] = {}
    for v in labels:
        t = node_types[v] if node_types is not None else ""
        groups.setdefault(t, []).append(v)
    split = {}
    for t in sorted(groups):
        members = groups[t]
        n = len(members)
        if n < 4:
            raise GraphError(f"type {t!r} has {n} labeled nodes; need at least 4 to split")
        by_label: dict[str, list[str]] = {}
        for v in members:
            by_label.setdefault(labels[v], []).append(v)
        keyed = []
        for lab in sorted(by_label):
            grp = by_label[lab]
            perm = rng.permutation(len(grp))
            for rank, j in enumerate(perm):
                keyed.append(((rank + 0.5) / len(grp), rng.random(), grp[j]))
        keyed.sort()
        n_train, n_val = n // 4, (2 * n + 4) // 8
        for pos, (_, _, v) in enumerate(keyed):
            split[v] = "train" if pos < n_train else "val" if pos < n_train + n_val else "test"
    return LabelTable(dict(labels), split)


# -- intermediate nodes ------------------------------------------------------


def intermediate_type(relation: str) -> str:
    return f"E_{relation}"


def augment_with_intermediates(g: HeteroGraph, per_direction: bool = False) -> HeteroGraph:
    """Replace every edge ``u -r- v`` by ``u - e - v`` through a new node ``e``.

    The new node has type ``E_<r>``; the two halves use relations ``<r>.src``
    (``u -> e``) and ``<r>.dst`` (``e -> v``).

    With ``per_direction=False`` one intermediate is created per listed edge
    and the result keeps the graph's directedness, so an undirected edge
    becomes two undirected edges.  With ``per_direction=True`` every stored
    directed edge gets its own intermediate and the result is directed; an
    intermediate then has out-degree 1, so a 2k-step walk on the result
    visits original nodes exactly like a k-step walk on ``g``.
    """
    nodes = [(nid, g.types[t]) for nid, t in zip(g.node_ids, g.node_type)]
    edges = []
    if per_direction:
        directed = [
            (g.node_ids[a], g.relations[r], g.node_ids[b])
            for a, r, b in zip(g.edge_src, g.edge_rel, g.edge_dst)
        ]
    else:
        directed = g.listed_edges
    for k, (u, r, v) in enumerate(directed):
        e = f"<{u}|{r}|{v}#{k}>"
        nodes.append((e, intermediate_type(r)))
        edges.append((u, f"{r}.src", e))
        edges.append((e, f"{r}.dst", v))
    undirected = g.undirected and not per_direction
    return HeteroGraph(nodes, edges, undirected=undirected, labels=g.labels)


def is_intermediate(g: HeteroGraph, v: str) -> bool:
    return g.type_of(v).startswith("E_") and v.startswith("<")


def contract_intermediates(g: HeteroGraph) -> list[tuple[str, str, str]]:
    """Recover the edges of the graph that ``g`` was augmented from."""
    heads = {}
    for e, r, v in g.listed_edges:
        if r.endswith(".dst"):
            heads[e] = v
    return [
        (u, r[: -len(".src")], heads[e])
        for u, r, e in g.listed_edges
        if r.endswith(".src")
    ]
