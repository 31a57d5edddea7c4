"""Relevance search, spectral community detection, clustering metrics and CSV export."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score
from sklearn.metrics.cluster import contingency_matrix

SYMMETRY_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_N = 256


@dataclass
class RelevanceMatrix:
    """Dense score matrix. ``col_ids`` defaults to ``node_ids`` (square case)."""

    node_ids: list[str]
    scores: np.ndarray
    col_ids: list[str] | None = None
    node_types: list[str] | None = None
    _row: dict = field(default=None, init=False, repr=False)
    _col: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        cols = self.columns
        if self.scores.shape != (len(self.node_ids), len(cols)):
            raise ValueError(
                f"scores shape {self.scores.shape} does not match "
                f"{len(self.node_ids)} x {len(cols)} ids"
            )
        self._row = {v: i for i, v in enumerate(self.node_ids)}
        self._col = {v: i for i, v in enumerate(cols)}

    @property
    def columns(self) -> list[str]:
        return self.col_ids if self.col_ids is not None else self.node_ids

    def score(self, a: str, b: str) -> float:
        try:
            return float(self.scores[self._row[a], self._col[b]])
        except KeyError as exc:
            raise KeyError(f"node {exc.args[0]!r} not indexed") from None

    def subset(self, nodes: Sequence[str]) -> "RelevanceMatrix":
        idx = [self._row[v] for v in nodes]
        types = [self.node_types[i] for i in idx] if self.node_types else None
        return RelevanceMatrix(list(nodes), self.scores[np.ix_(idx, idx)], node_types=types)


@dataclass
class Partition:
    assignment: dict[str, int]
    k: int


@dataclass
class SearchResult:
    query: str
    hits: list[tuple[str, float]]
    short: bool = False


# -- relevance search --------------------------------------------------------


def top_k_search(
    m: RelevanceMatrix | Callable[[str], tuple[Sequence[str], np.ndarray]],
    q: str,
    n: int,
    type_filter: str | None = None,
    node_types: Mapping[str, str] | None = None,
    exclude_self: bool = False,
) -> SearchResult:
    """Rank candidates by relevance to ``q``.

    ``m`` is a relevance matrix or a scorer returning ``(candidates, scores)``.
    Ties go to the query itself, then to the earlier candidate.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if isinstance(m, RelevanceMatrix):
        if q not in m._row:
            raise KeyError(f"unknown query {q!r}")
        cands = m.columns
        scores = m.scores[m._row[q]]
        if node_types is None and m.node_types is not None and m.col_ids is None:
            node_types = dict(zip(m.node_ids, m.node_types))
    else:
        cands, scores = m(q)
    scores = np.asarray(scores, dtype=np.float64)
    keep = []
    for i, v in enumerate(cands):
        if exclude_self and v == q:
            continue
        if type_filter is not None:
            if node_types is None:
                raise ValueError("type_filter needs node types")
            if node_types[v] != type_filter:
                continue
        keep.append(i)
    keep.sort(key=lambda i: (-scores[i], cands[i] != q, i))
    hits = [(cands[i], float(scores[i])) for i in keep[:n]]
    return SearchResult(q, hits, short=len(hits) < n)


def recall_at_n(results: SearchResult, q: str, labels: Mapping[str, str], n: int) -> float:
    if q not in labels:
        raise KeyError(f"query {q!r} is unlabeled")
    same = sum(1 for v, _ in results.hits[:n] if labels.get(v) == labels[q])
    return same / n


# -- eigensolver -------------------------------------------------------------


def _off_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def _jacobi(a: np.ndarray, tol: float, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, np.linalg.norm(a))
    for _ in range(max_sweeps):
        if _off_norm(a) < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                # negligible against both diagonal entries: drop it
                if abs(app) + 1e3 * abs(apq) == abs(app) and abs(aqq) + 1e3 * abs(apq) == abs(aqq):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * cp - s * cq, s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * rp - s * rq, s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    else:
        if _off_norm(a) >= tol * scale:
            raise RuntimeError("Jacobi iteration did not converge")
    return np.diag(a).copy(), v


def symmetric_eigs(
    a: np.ndarray, m: int | None = None, which: str = "smallest", solver: str = "auto"
) -> tuple[np.ndarray, np.ndarray]:
    """``m`` eigenpairs of a symmetric matrix, eigenvalues ascending (smallest) or descending.

    ``solver="jacobi"`` uses cyclic Jacobi rotations until the off-diagonal
    norm drops below 1e-12 (relative to ``max(1, ||A||)``); ``"lapack"``
    uses ``numpy.linalg.eigh``; ``"auto"`` picks Jacobi up to 256 rows.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"need a square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix is not symmetric (max |A - A^T| = {asym:.3g})")
    n = a.shape[0]
    m = n if m is None else m
    if not 0 <= m <= n:
        raise ValueError(f"cannot take {m} eigenpairs of a {n}x{n} matrix")
    if solver == "auto":
        solver = "jacobi" if n <= JACOBI_MAX_N else "lapack"
    if solver == "jacobi":
        vals, vecs = _jacobi((a + a.T) / 2, JACOBI_TOL)
    elif solver == "lapack":
        vals, vecs = np.linalg.eigh((a + a.T) / 2)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    order = np.argsort(vals, kind="stable")
    if which == "largest":
        order = order[::-1]
    elif which != "smallest":
        raise ValueError(f"which must be 'smallest' or 'largest', got {which!r}")
    order = order[:m]
    return vals[order], vecs[:, order]


# -- spectral clustering -------------------------------------------------------


def spectral_clustering(m: RelevanceMatrix, k: int, seed: int = 0, solver: str = "auto") -> Partition:
    n = len(m.node_ids)
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= {n}, got k={k}")
    w = np.clip((m.scores + m.scores.T) / 2, 0.0, None)
    np.fill_diagonal(w, 0.0)
    deg = w.sum(axis=1)
    isolated = deg <= 0
    inv_sqrt = np.divide(1.0, np.sqrt(deg), out=np.zeros(n), where=~isolated)
    lap = np.eye(n) - inv_sqrt[:, None] * w * inv_sqrt[None, :]
    _, u = symmetric_eigs(lap, k, "smallest", solver=solver)
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    emb = np.divide(u, norms, out=np.zeros_like(u), where=norms > 0)
    active = ~isolated
    if active.sum() < k:
        raise ValueError(f"only {active.sum()} nodes have nonzero affinity, cannot form {k} clusters")
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, random_state=seed)
    labels = np.empty(n, dtype=np.int64)
    labels[active] = km.fit_predict(emb[active])
    if isolated.any():
        warnings.warn(
            f"{int(isolated.sum())} node(s) have zero affinity; assigned to nearest centroid",
            RuntimeWarning,
            stacklevel=2,
        )
        d = ((u[isolated][:, None, :] - km.cluster_centers_[None]) ** 2).sum(-1)
        labels[isolated] = d.argmin(axis=1)
    return Partition({v: int(c) for v, c in zip(m.node_ids, labels)}, k)


# -- metrics -----------------------------------------------------------------


def _pair_count(x: np.ndarray) -> float:
    return float((x * (x - 1) / 2).sum())


def clustering_metrics(pred: Partition | Mapping[str, int], truth: Mapping[str, str]) -> dict[str, float]:
    """Pairwise F-score, NMI (arithmetic normalisation), ARI and purity."""
    if hasattr(truth, "labels"):
        truth = truth.labels
    assign = pred.assignment if isinstance(pred, Partition) else pred
    nodes = [v for v in assign if v in truth]
    if not nodes:
        raise ValueError("no predicted node carries a ground-truth label")
    y_pred = [assign[v] for v in nodes]
    y_true = [truth[v] for v in nodes]
    c = contingency_matrix(y_true, y_pred)
    tp = _pair_count(c)
    pred_pairs = _pair_count(c.sum(axis=0))
    true_pairs = _pair_count(c.sum(axis=1))
    precision = tp / pred_pairs if pred_pairs else 1.0
    recall = tp / true_pairs if true_pairs else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "f_score": f,
        "nmi": float(normalized_mutual_info_score(y_true, y_pred, average_method="arithmetic")),
        "ari": float(adjusted_rand_score(y_true, y_pred)),
        "purity": float(c.max(axis=0).sum() / len(nodes)),
    }


# -- export ------------------------------------------------------------------


def _write_grid(path, row_names, col_names, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([""] + list(col_names))
        for name, row in zip(row_names, values):
            wr.writerow([name] + [f"{x:.6f}" for x in row])


def export_relevance_matrix(m: RelevanceMatrix, path) -> None:
    _write_grid(path, m.node_ids, m.columns, m.scores)


def read_relevance_matrix(path) -> RelevanceMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    cols = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    try:
        vals = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    vals = vals.reshape(len(names), len(cols))
    return RelevanceMatrix(names, vals, col_ids=None if cols == names else cols)


def export_attention(model, path) -> list[Path]:
    """One CSV per (layer, head): rows are source types, columns target types."""
    out_dir = Path(path)
    out_dir.mkdir(parents=True, exist_ok=True)
    if model.attention is None:
        raise ValueError("model has no attention matrices; run inference first")
    files = []
    for l, per_head in enumerate(model.attention, 1):
        for h, mat in enumerate(per_head, 1):
            f = out_dir / f"attention_layer{l}_head{h}.csv"
            _write_grid(f, model.types, model.types, mat)
            files.append(f)
    return files
