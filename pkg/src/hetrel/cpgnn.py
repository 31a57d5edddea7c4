"""GSim: context-path GNN layers with relation attention and relation message passing,
type-length attention, the relevance function, its losses and the training loop."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .evaluation import RelevanceMatrix
from .hetgraph import GraphError, HeteroGraph, LabelTable
from .tensor import Tensor

log = logging.getLogger(__name__)

FORMAT_MAGIC = b"HETREL-GSIM"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Unreadable, corrupt or incompatible model file."""


class NumericError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    K: int = 4
    d: int = 128
    H: int = 2
    node_dropout: float = 0.3
    lr: float = 0.05
    max_epochs: int = 200
    seed: int = 0
    loss_balance: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        self.loss_balance = tuple(float(x) for x in self.loss_balance)
        if self.d <= 0 or self.K < 1 or self.H < 1:
            raise ValueError(f"need d > 0, K >= 1, H >= 1 (got d={self.d}, K={self.K}, H={self.H})")
        if not 0 <= self.node_dropout < 1:
            raise ValueError(f"node_dropout must lie in [0, 1), got {self.node_dropout}")
        if self.lr <= 0 or self.max_epochs < 1:
            raise ValueError("lr must be positive and max_epochs >= 1")
        if len(self.loss_balance) != 2 or min(self.loss_balance) < 0 or sum(self.loss_balance) == 0:
            raise ValueError(f"loss_balance must be two non-negative weights, got {self.loss_balance}")


@dataclass
class LayerOutput:
    C: Tensor
    # attention[h] is |A| x |A|, rows = source type, cols = target type
    attention: np.ndarray


class GraphIndex:
    """Per-relation edge arrays and type bookkeeping a forward pass needs."""

    def __init__(self, g: HeteroGraph):
        self.n = g.num_nodes
        self.types = list(g.types)
        self.relations = list(g.relations)
        self.node_type = g.node_type.copy()
        self.members = [np.flatnonzero(g.node_type == t) for t in range(len(g.types))]
        # position of each node inside its type's member list
        self.local = np.zeros(self.n, dtype=np.int64)
        for m in self.members:
            self.local[m] = np.arange(len(m))
        self.rel_src, self.rel_dst, self.rel_deg = [], [], []
        # rel_adj[r]: |members[t]| x |members[s]| edge counts of relation r: s -> t
        self.rel_adj: list[sp.csr_matrix] = []
        self.rel_pair: list[tuple[int, int]] = []
        sources: dict[int, set[int]] = {}
        for r in g.relations:
            src, dst = g.relation_edges(r)
            s_name, t_name = g.signature[r]
            s, t = g.type_index[s_name], g.type_index[t_name]
            self.rel_src.append(src)
            self.rel_dst.append(dst)
            self.rel_deg.append(np.bincount(dst, minlength=self.n).astype(np.float64)[:, None])
            self.rel_pair.append((s, t))
            shape = (len(self.members[t]), len(self.members[s]))
            self.rel_adj.append(
                sp.csr_matrix((np.ones(len(src)), (self.local[dst], self.local[src])), shape=shape)
            )
            sources.setdefault(t, set()).add(s)
        self.sources_into = {t: sorted(s) for t, s in sources.items()}
        self.in_degree = np.bincount(g.edge_dst, minlength=self.n).astype(np.float64)[:, None]
        self.has_in = (self.in_degree > 0).astype(np.float64)


class GsimModel:
    def __init__(self, config: TrainConfig, graph: HeteroGraph | None = None):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self.types: list[str] = []
        self.relations: list[str] = []
        self.signature: dict[str, tuple[str, str]] = {}
        self.node_ids: list[str] = []
        self.node_types: list[str] = []
        self.labels: dict[str, str] = {}
        self.split: dict[str, str] = {}
        self.attention: list[np.ndarray] | None = None
        self.embeddings: np.ndarray | None = None
        self.history: list[dict] = []
        if graph is not None:
            self.types = list(graph.types)
            self.relations = list(graph.relations)
            self.signature = dict(graph.signature)
            self.node_ids = list(graph.node_ids)
            self.node_types = [graph.types[t] for t in graph.node_type]
            self.labels = dict(graph.labels)

    def p(self, name: str) -> Tensor:
        return self.params[name]

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def num_parameter_entries(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def check_graph(self, g: HeteroGraph) -> None:
        if g.node_ids != self.node_ids or list(g.types) != self.types or list(g.relations) != self.relations:
            raise GraphError("graph vocabulary does not match the model")

    def relevance_matrix(self, nodes: Sequence[str] | None = None) -> RelevanceMatrix:
        if self.embeddings is None:
            raise ValueError("model has no embeddings; train it or run infer()")
        idx_of = {v: i for i, v in enumerate(self.node_ids)}
        nodes = list(self.node_ids if nodes is None else nodes)
        idx = [idx_of[v] for v in nodes]
        h = self.embeddings[idx]
        types = [self.node_types[i] for i in idx]
        return RelevanceMatrix(nodes, _open_sigmoid(h @ h.T), node_types=types)

    def relevance(self, vi: str, vj: str) -> float:
        return relevance(self.embeddings, self.node_ids.index(vi), self.node_ids.index(vj))


def _param(model: GsimModel, name: str, value: np.ndarray) -> Tensor:
    t = Tensor(value, requires_grad=True, name=name)
    model.params[name] = t
    return t


def q_name(l: int, h: int, t: str) -> str:
    return f"layer{l}.Q.{h}.{t}"


def k_name(l: int, h: int, s: str) -> str:
    return f"layer{l}.K.{h}.{s}"


def init_model(g: HeteroGraph, cfg: TrainConfig, seed: int | None = None) -> GsimModel:
    """Xavier-uniform weights and embeddings, zero biases, type-length scores at 1."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    model = GsimModel(cfg, g)
    d, n = cfg.d, g.num_nodes
    _param(model, "Z", T.xavier_uniform(rng, n, d))
    _param(model, "alpha", np.ones((len(g.types), cfg.K)))
    for r in g.relations:
        _param(model, f"W_rel.{r}", T.xavier_uniform(rng, 2 * d, d))
    for l in range(1, cfg.K + 1):
        for h in range(cfg.H):
            for t in g.types:
                _param(model, q_name(l, h, t), T.xavier_uniform(rng, d, d))
                _param(model, k_name(l, h, t), T.xavier_uniform(rng, d, d))
        _param(model, f"layer{l}.W1", T.xavier_uniform(rng, d, d))
        _param(model, f"layer{l}.B1", np.zeros((1, d)))
        _param(model, f"layer{l}.W2", T.xavier_uniform(rng, cfg.H * d, d))
        _param(model, f"layer{l}.B2", np.zeros((1, d)))
        for k, v in T.GRUParams.init(rng, d, prefix=f"layer{l}.gru").tensors().items():
            v.name = f"layer{l}.gru.{k}"
            model.params[v.name] = v
    return model


def gru_params(model: GsimModel, l: int) -> T.GRUParams:
    pre = f"layer{l}.gru."
    return T.GRUParams(*(model.p(pre + k) for k in ("W_z", "b_z", "W_r", "b_r", "W_h", "b_h")))


# -- building blocks -------------------------------------------------------------


def graph_encoder(C_A: Tensor, dropout: float, rng: np.random.Generator | None) -> Tensor:
    """Mean context vector of one node type after node dropout."""
    if C_A.rows == 0:
        raise GraphError("graph encoder needs at least one node of the type")
    if dropout > 0 and rng is not None:
        keep = rng.random(C_A.rows) >= dropout
        if keep.any():
            C_A = T.gather_rows(C_A, np.flatnonzero(keep))
    return T.mean_rows(C_A)


def relation_attention(h_sources: Sequence[Tensor], h_target: Tensor, W_q: Tensor, W_ks: Sequence[Tensor]) -> Tensor:
    """Softmax over source types of scaled query-key products (1 x #sources)."""
    if not h_sources:
        raise GraphError("no incoming relation for the target type")
    q = T.matmul(h_target, W_q)
    scale = 1.0 / math.sqrt(q.cols)
    logits = [T.scale(T.inner_product(q, T.matmul(h_s, W_k)), scale) for h_s, W_k in zip(h_sources, W_ks)]
    return T.row_softmax(T.concat_cols(logits))


def relation_message(c_i: Tensor, c_j: Tensor, W_r: Tensor) -> Tensor:
    """Synthesised intermediate-node representation ``[c_i || c_j] W_r``.

    Works row-wise, so ``c_i``/``c_j`` may hold one row per edge.
    """
    if c_i.shape != c_j.shape:
        raise T.ShapeError(f"relation_message: {c_i.shape} vs {c_j.shape}")
    return T.matmul(T.concat_cols([c_i, c_j]), W_r)


def sum_extractor(d: int) -> np.ndarray:
    """``W_r`` that turns the relation message into ``c_i + c_j``."""
    return np.vstack([np.eye(d), np.eye(d)])


@dataclass
class LayerOptions:
    """Knobs for reduced configurations; the defaults are the trained model."""

    activation: str = "relu"
    use_gru: bool = True
    normalize: bool = False
    fixed_attention: float | None = None


def layer_forward(
    C_prev: Tensor,
    gi: GraphIndex,
    model: GsimModel,
    l: int,
    train_mode: bool,
    rng: np.random.Generator | None = None,
    opts: LayerOptions = LayerOptions(),
) -> LayerOutput:
    cfg = model.config
    d, n, nt = cfg.d, gi.n, len(gi.types)
    dropout = cfg.node_dropout if train_mode else 0.0

    by_type = {t: T.gather_rows(C_prev, gi.members[t]) for t in range(nt) if len(gi.members[t])}
    summaries = {}
    needed = set(gi.sources_into) | {s for ss in gi.sources_into.values() for s in ss}
    for t in sorted(needed):
        summaries[t] = graph_encoder(by_type[t], dropout, rng)

    # alpha[h][(s, t)] -> 1x1 tensor
    attn_vals = np.zeros((cfg.H, nt, nt))
    alpha: list[dict[tuple[int, int], Tensor]] = []
    for h in range(cfg.H):
        per = {}
        for t, srcs in gi.sources_into.items():
            if opts.fixed_attention is not None:
                a = Tensor(np.full((1, len(srcs)), opts.fixed_attention))
            else:
                a = relation_attention(
                    [summaries[s] for s in srcs],
                    summaries[t],
                    model.p(q_name(l, h, gi.types[t])),
                    [model.p(k_name(l, h, gi.types[s])) for s in srcs],
                )
            for j, s in enumerate(srcs):
                per[(s, t)] = T.take_cols(a, [j])
                attn_vals[h, s, t] = a.data[0, j]
        alpha.append(per)
    if not np.all(np.isfinite(attn_vals)):
        raise NumericError(f"non-finite relation attention at layer {l}")

    # Per relation r: S -> T, the summed messages sum_j [c_i || c_j] W_r over in-edges
    # of i equal deg_r(i) * c_i W_top + sum_j c_j W_bot; no per-edge vectors are
    # formed and each product only touches the rows of the type it applies to.
    msgs = []
    for r, name in enumerate(gi.relations):
        s, t = gi.rel_pair[r]
        W = model.p(f"W_rel.{name}")
        W_top = T.gather_rows(W, np.arange(d))
        W_bot = T.gather_rows(W, np.arange(d, 2 * d))
        tgt = gi.members[t]
        own = T.mul(Tensor(gi.rel_deg[r][tgt]), T.matmul(by_type[t], W_top))
        nbr = T.sparse_matmul(gi.rel_adj[r], T.matmul(by_type[s], W_bot))
        msgs.append(T.add(own, nbr))

    act = {"relu": T.relu, "identity": lambda x: x}[opts.activation]
    W1, B1 = model.p(f"layer{l}.W1"), model.p(f"layer{l}.B1")
    inv_deg = np.divide(1.0, gi.in_degree, out=np.zeros_like(gi.in_degree), where=gi.in_degree > 0)
    heads = []
    for h in range(cfg.H):
        agg = None
        for t in sorted(gi.sources_into):
            part = None
            for r, m in enumerate(msgs):
                if gi.rel_pair[r][1] != t:
                    continue
                term = T.mul(m, alpha[h][gi.rel_pair[r]])
                part = term if part is None else T.add(part, term)
            full = T.scatter_add_rows(part, gi.members[t], n)
            agg = full if agg is None else T.add(agg, full)
        if agg is None:
            agg = Tensor(np.zeros((n, d)))
        if opts.normalize:
            agg = T.mul(agg, Tensor(inv_deg))
        heads.append(act(T.add(T.matmul(agg, W1), B1)))
    cat = heads[0] if len(heads) == 1 else T.concat_cols(heads)
    C_hat = T.add(T.matmul(cat, model.p(f"layer{l}.W2")), model.p(f"layer{l}.B2"))
    C_hat = T.mul(C_hat, Tensor(gi.has_in))
    C = T.gru_cell(C_prev, C_hat, gru_params(model, l)) if opts.use_gru else C_hat
    if not np.all(np.isfinite(C.data)):
        raise NumericError(f"non-finite context vectors at layer {l}")
    return LayerOutput(C, attn_vals)


def forward_all(
    g: HeteroGraph | GraphIndex,
    model: GsimModel,
    train_mode: bool,
    rng: np.random.Generator | None = None,
    opts: LayerOptions = LayerOptions(),
) -> tuple[list[Tensor], list[np.ndarray]]:
    """One K-deep pass; layer k's output is the length-k context matrix."""
    gi = g if isinstance(g, GraphIndex) else GraphIndex(g)
    C = model.p("Z")
    outs, attn = [], []
    for l in range(1, model.config.K + 1):
        lo = layer_forward(C, gi, model, l, train_mode, rng, opts)
        C = lo.C
        outs.append(C)
        attn.append(lo.attention)
    return outs, attn


def type_length_combine(Cs: Sequence[Tensor], model: GsimModel, node_type: np.ndarray) -> Tensor:
    """Per node type, a weighted sum of the context matrices of every length."""
    w = T.gather_rows(model.p("alpha"), node_type)
    H = None
    for k, C in enumerate(Cs):
        term = T.mul(T.take_cols(w, [k]), C)
        H = term if H is None else T.add(H, term)
    return H


_TINY = np.finfo(np.float64).tiny
_BELOW_ONE = 1.0 - np.finfo(np.float64).epsneg


def _open_sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    # keep scores strictly inside (0, 1) once float64 saturates
    return np.clip(s, _TINY, _BELOW_ONE)


def relevance(H: np.ndarray | Tensor, vi: int, vj: int) -> float:
    H = H.data if isinstance(H, Tensor) else H
    return float(_open_sigmoid(np.array(H[vi] @ H[vj])))


# -- losses ------------------------------------------------------------------------


def loss_supervised(H: Tensor, idx: Sequence[int], labels: Sequence[str]) -> Tensor:
    """Contrastive loss over labeled nodes.

    Per anchor ``i``: ``-log mean_{j in I(i)} S(i,j) - log mean_{j not in I(i)} (1 - S(i,j))``,
    where ``I(i)`` are the other nodes with the same label.  Summed over anchors
    that have at least one positive and one negative.  Computed in log space so
    saturated scores keep finite gradients.
    """
    idx = np.asarray(idx, dtype=np.int64)
    lab = np.asarray(labels)
    same = lab[:, None] == lab[None, :]
    pos = same & ~np.eye(len(idx), dtype=bool)
    neg = ~same
    ok = np.flatnonzero(pos.any(axis=1) & neg.any(axis=1))
    if len(ok) == 0:
        raise ValueError("supervised loss needs at least two labels with a repeated label")
    Hs = T.gather_rows(H, idx)
    X = T.gather_rows(T.matmul(Hs, T.transpose(Hs)), ok)
    log_pos = T.masked_log_mean_exp(T.log_sigmoid(X), pos[ok])
    log_neg = T.masked_log_mean_exp(T.log_sigmoid(T.scale(X, -1.0)), neg[ok])
    return T.scale(T.sum_all(T.add(log_pos, log_neg)), -1.0)


def loss_self(H: Tensor) -> Tensor:
    """Mean self-relevance deficit ``1 - S(v, v)``."""
    self_dot = T.sum_cols(T.mul(H, H))
    return T.mean_all(T.sigmoid(T.scale(self_dot, -1.0)))


# -- training ------------------------------------------------------------------------


@dataclass
class _Objective:
    train_idx: np.ndarray
    train_lab: list[str]
    val_idx: np.ndarray
    val_lab: list[str]
    w_s: float
    w_u: float


def _objective(H: Tensor, idx, lab, w_s: float, w_u: float):
    ls = loss_supervised(H, idx, lab) if w_s > 0 else Tensor(0.0)
    lu = loss_self(H)
    total = T.add(T.scale(ls, w_s), T.scale(lu, w_u))
    return total, ls, lu


def infer(g: HeteroGraph, model: GsimModel, gi: GraphIndex | None = None) -> np.ndarray:
    """Inference-mode embeddings; also stores them and the attention on the model."""
    gi = gi or GraphIndex(g)
    Cs, attn = forward_all(gi, model, train_mode=False)
    H = type_length_combine(Cs, model, gi.node_type)
    model.embeddings = H.data.copy()
    model.attention = attn
    return model.embeddings


def attention_deviation(attn: Sequence[np.ndarray], gi: GraphIndex) -> float:
    """Max |sum over sources - 1| over every (layer, head, target type)."""
    worst = 0.0
    for per_layer in attn:
        for t in gi.sources_into:
            worst = max(worst, float(np.max(np.abs(per_layer[:, :, t].sum(axis=1) - 1.0))))
    return worst


def step_scales(params: Sequence[Tensor]) -> list[float]:
    """Adam step multiplier per parameter: ``1/sqrt(fan_in)`` for weight matrices, 1 otherwise.

    Row vectors (biases), the type-length scores and the embedding table ``Z``
    take the plain learning rate.  Keeps the per-entry step of a weight matrix
    proportional to its initial scale.
    """
    out = []
    for p in params:
        if p.name in ("Z", "alpha") or p.rows == 1:
            out.append(1.0)
        else:
            out.append(1.0 / math.sqrt(p.rows))
    return out


def train(
    g: HeteroGraph,
    labels: LabelTable,
    cfg: TrainConfig,
    callback: Callable[[dict], None] | None = None,
) -> GsimModel:
    """Full-graph training with Adam; returns the best-on-validation snapshot.

    The snapshot criterion is the supervised loss on the validation nodes,
    whatever the loss balance; without two validation labels it falls back
    to the training objective.
    """
    w_s, w_u = cfg.loss_balance
    idx_of = g.index
    train_nodes = [v for v in g.node_ids if labels.split.get(v) == "train"]
    val_nodes = [v for v in g.node_ids if labels.split.get(v) == "val"]
    if w_s > 0 and not train_nodes:
        raise ValueError("empty training split")
    tr_idx = np.array([idx_of[v] for v in train_nodes], dtype=np.int64)
    tr_lab = [labels.labels[v] for v in train_nodes]
    va_idx = np.array([idx_of[v] for v in val_nodes], dtype=np.int64)
    va_lab = [labels.labels[v] for v in val_nodes]
    use_val = len(set(va_lab)) >= 2 and len(va_lab) > len(set(va_lab))

    model = init_model(g, cfg)
    model.labels = dict(labels.labels)
    model.split = dict(labels.split)
    gi = GraphIndex(g)
    params = model.parameters()
    adam = T.AdamState(lr=cfg.lr, lr_scale=step_scales(params))
    drop_rng = np.random.default_rng([cfg.seed, 1])
    best, best_val = None, math.inf

    for epoch in range(1, cfg.max_epochs + 1):
        for p in params:
            p.zero_grad()
        with T.Tape() as tape:
            Cs, attn = forward_all(gi, model, train_mode=True, rng=drop_rng)
            H = type_length_combine(Cs, model, gi.node_type)
            loss, ls, lu = _objective(H, tr_idx, tr_lab, w_s, w_u)
            if not math.isfinite(loss.item()):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            tape.backward(loss)
        try:
            T.adam_step(adam, params, [p.grad for p in params])
        except FloatingPointError as exc:
            raise NumericError(f"epoch {epoch}: {exc}") from None

        Cv, attn_v = forward_all(gi, model, train_mode=False)
        Hv = type_length_combine(Cv, model, gi.node_type)
        if use_val:
            val = loss_supervised(Hv, va_idx, va_lab).item()
        else:
            val = _objective(Hv, tr_idx, tr_lab, w_s, w_u)[0].item()
        record = {
            "epoch": epoch,
            "loss": loss.item(),
            "loss_supervised": ls.item(),
            "loss_self": lu.item(),
            "val": val,
            "attention_dev": max(attention_deviation(attn, gi), attention_deviation(attn_v, gi)),
        }
        model.history.append(record)
        if callback:
            callback(record)
        log.debug("epoch %d loss %.6f val %.6f", epoch, record["loss"], val)
        if math.isfinite(val) and val < best_val:
            best_val = val
            best = {k: t.data.copy() for k, t in model.params.items()}
            model.embeddings = Hv.data.copy()
            model.attention = attn_v

    if best is not None:
        for k, arr in best.items():
            model.params[k].data[...] = arr
    else:
        infer(g, model, gi)
    return model


# -- persistence ---------------------------------------------------------------------


def save_model(model: GsimModel, path) -> None:
    arrays: list[tuple[str, np.ndarray]] = [(k, t.data) for k, t in model.params.items()]
    if model.embeddings is not None:
        arrays.append(("@embeddings", model.embeddings))
    if model.attention is not None:
        for l, a in enumerate(model.attention, 1):
            arrays.append((f"@attention.{l}", a.reshape(-1, a.shape[-1])))
    blobs = [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays]
    payload = b"".join(blobs)
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "types": model.types,
        "relations": model.relations,
        "signature": {r: list(s) for r, s in model.signature.items()},
        "node_ids": model.node_ids,
        "node_types": model.node_types,
        "labels": model.labels,
        "split": model.split,
        "arrays": [{"name": k, "shape": list(a.shape)} for k, a in arrays],
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    text = json.dumps(header, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(FORMAT_MAGIC + b" %d\n" % FORMAT_VERSION)
        fh.write(text.encode("utf-8") + b"\n")
        fh.write(payload)


def load_model(path, **expect) -> GsimModel:
    """Read a model file; keyword arguments (e.g. ``K=4``) must match its config."""
    raw = Path(path).read_bytes()
    try:
        magic, rest = raw.split(b"\n", 1)
        head, payload = rest.split(b"\n", 1)
    except ValueError:
        raise ModelFormatError(f"{path}: corrupt model file (missing header)") from None
    parts = magic.split(b" ")
    if parts[0] != FORMAT_MAGIC or len(parts) != 2:
        raise ModelFormatError(f"{path}: not a GSim model file")
    if int(parts[1]) != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: format version {int(parts[1])}, expected {FORMAT_VERSION}")
    try:
        header = json.loads(head)
    except json.JSONDecodeError:
        raise ModelFormatError(f"{path}: corrupt model header") from None
    if len(payload) != header["payload_bytes"] or hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise ModelFormatError(f"{path}: corrupt or truncated payload")
    cfg_dict = header["config"]
    known = {f.name for f in fields(TrainConfig)}
    cfg = TrainConfig(**{k: v for k, v in cfg_dict.items() if k in known})
    for key, want in expect.items():
        if want is not None and getattr(cfg, key) != want:
            raise ModelFormatError(f"{path}: model has {key}={getattr(cfg, key)}, requested {want}")
    model = GsimModel(cfg)
    model.types = header["types"]
    model.relations = header["relations"]
    model.signature = {r: tuple(s) for r, s in header["signature"].items()}
    model.node_ids = header["node_ids"]
    model.node_types = header["node_types"]
    model.labels = header["labels"]
    model.split = header["split"]
    off = 0
    attention = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=off).astype(np.float64).reshape(shape)
        off += 8 * count
        name = spec["name"]
        if name == "@embeddings":
            model.embeddings = arr
        elif name.startswith("@attention."):
            attention[int(name.split(".")[1])] = arr.reshape(cfg.H, -1, arr.shape[-1])
        else:
            model.params[name] = Tensor(arr, requires_grad=True, name=name)
    if attention:
        model.attention = [attention[l] for l in sorted(attention)]
    return model


def config_fields() -> list[str]:
    return [f.name for f in fields(TrainConfig)]
