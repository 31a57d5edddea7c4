"""Dense 2-D reverse-mode autodiff on float64, plus a GRU cell and Adam.

Operations record themselves on the active :class:`Tape` when any input
requires a gradient.  Outside a tape every op is a plain numpy computation.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


_local = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_local, "tape", None)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "is_leaf", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.is_leaf = True
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Records ops in creation order; :meth:`backward` sweeps them in reverse."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self.consumed = False
        self._prev = None

    def __enter__(self) -> "Tape":
        self._prev = _active_tape()
        _local.tape = self
        return self

    def __exit__(self, *exc) -> None:
        _local.tape = self._prev

    def record(self, out: Tensor, parents: tuple[Tensor, ...], fn: Callable) -> None:
        if self.consumed:
            raise TapeError("tape already consumed by backward(); start a new tape")
        out.requires_grad = True
        out.is_leaf = False
        self.nodes.append((out, parents, fn))

    def backward(self, loss: Tensor) -> None:
        if self.consumed:
            raise TapeError("tape already consumed")
        if loss.shape != (1, 1):
            raise ShapeError(f"loss must be 1x1, got {loss.shape}")
        if not any(loss is n[0] for n in self.nodes):
            raise TapeError("loss was not computed on this tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
        for out, parents, fn in reversed(self.nodes):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            pgs = fn(g)
            for p, pg in zip(parents, pgs):
                if pg is None or not p.requires_grad:
                    continue
                if p.is_leaf:
                    p.grad = pg.copy() if p.grad is None else p.grad + pg
                else:
                    key = id(p)
                    grads[key] = pg if key not in grads else grads[key] + pg
        self.consumed = True
        self.nodes = []


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    tape = tape or _active_tape()
    if tape is None:
        raise TapeError("no active tape")
    tape.backward(loss)


def _op(value: np.ndarray, parents: Sequence[Tensor], fn: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = value
    out.grad = None
    out.requires_grad = False
    out.is_leaf = True
    out.name = None
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        tape.record(out, tuple(parents), fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# -- primitives ----------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")

    def fn(g):
        return (g @ b.data.T if a.requires_grad else None, a.data.T @ g if b.requires_grad else None)

    return _op(a.data @ b.data, (a, b), fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")
    return _op(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")
    return _op(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; row, column and 1x1 operands broadcast."""
    _broadcast_shape(a, b, "mul")

    def fn(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return _op(a.data * b.data, (a, b), fn)


def scale(a: Tensor, c: float) -> Tensor:
    return _op(a.data * c, (a,), lambda g: (g * c,))


def transpose(a: Tensor) -> Tensor:
    return _op(a.data.T.copy(), (a,), lambda g: (g.T,))


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = {p.rows for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ: {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.cols for p in parts])

    def fn(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return _op(np.concatenate([p.data for p in parts], axis=1), tuple(parts), fn)


def _summation(idx: np.ndarray, n: int) -> sp.csr_matrix:
    """Sparse ``n x len(idx)`` matrix whose product sums rows into slot ``idx``."""
    m = len(idx)
    return sp.csr_matrix((np.ones(m), (idx, np.arange(m))), shape=(n, m))


def _accumulate_rows(g: np.ndarray, idx: np.ndarray, n: int, unique: bool) -> np.ndarray:
    if unique:
        out = np.zeros((n, g.shape[1]))
        out[idx] = g
        return out
    return np.asarray(_summation(idx, n) @ g)


def _is_unique(idx: np.ndarray) -> bool:
    return len(np.unique(idx)) == len(idx)


def take_cols(a: Tensor, cols: Sequence[int] | slice) -> Tensor:
    idx = np.arange(a.cols)[cols]
    unique = _is_unique(idx)

    def fn(g):
        return (_accumulate_rows(g.T, idx, a.cols, unique).T,)

    return _op(a.data[:, idx], (a,), fn)


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    unique = _is_unique(idx)
    return _op(a.data[idx], (a,), lambda g: (_accumulate_rows(g, idx, a.rows, unique),))


def scatter_add_rows(a: Tensor, idx: np.ndarray, n: int) -> Tensor:
    """Row ``i`` of the result is the sum of rows of ``a`` whose index is ``i``."""
    idx = np.asarray(idx, dtype=np.int64)
    if len(idx) != a.rows:
        raise ShapeError(f"scatter_add_rows: {len(idx)} indices for {a.rows} rows")
    if len(idx) and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"scatter_add_rows: index out of range for {n} rows")
    out = _accumulate_rows(a.data, idx, n, _is_unique(idx))
    return _op(out, (a,), lambda g: (g[idx],))


def sparse_matmul(a: sp.spmatrix, b: Tensor) -> Tensor:
    """Constant sparse matrix times a tensor; only ``b`` carries a gradient."""
    a = sp.csr_matrix(a)
    if a.shape[1] != b.rows:
        raise ShapeError(f"sparse_matmul: shapes {a.shape} and {b.shape} do not align")
    at = a.T.tocsr()
    return _op(np.asarray(a @ b.data), (b,), lambda g: (np.asarray(at @ g),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _op(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    return _op(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _op(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def log(a: Tensor) -> Tensor:
    return _op(np.log(a.data), (a,), lambda g: (g / a.data,))


def log_sigmoid(a: Tensor) -> Tensor:
    """``log(sigmoid(x))`` without underflow for large ``|x|``."""
    x = a.data
    val = np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))
    e = np.exp(-np.abs(x))
    s_neg = np.where(x >= 0, e / (1.0 + e), 1.0 / (1.0 + e))  # sigmoid(-x)
    return _op(val, (a,), lambda g: (g * s_neg,))


def masked_log_mean_exp(a: Tensor, mask: np.ndarray) -> Tensor:
    """Per-row ``log(mean(exp(a_ij)))`` over masked entries (n x 1); rows need one entry."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise ShapeError(f"masked_log_mean_exp: mask {mask.shape} vs tensor {a.shape}")
    if not mask.any(axis=1).all():
        raise ValueError("masked_log_mean_exp: a row has no entries")
    x = np.where(mask, a.data, -np.inf)
    mx = x.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(x - mx), 0.0)
    tot = e.sum(axis=1, keepdims=True)
    val = mx + np.log(tot) - np.log(mask.sum(axis=1, keepdims=True))
    w = e / tot
    return _op(val, (a,), lambda g: (g * w,))


def row_softmax(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)
    return _op(s, (a,), lambda g: (s * (g - (g * s).sum(axis=1, keepdims=True)),))


def masked_mean_rows(a: Tensor, mask: np.ndarray) -> Tensor:
    """Per-row mean over the entries where ``mask`` is true (n x 1); empty rows give 0."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != a.shape:
        raise ShapeError(f"masked_mean_rows: mask {mask.shape} vs tensor {a.shape}")
    cnt = mask.sum(axis=1, keepdims=True)
    w = np.divide(mask, cnt, out=np.zeros_like(mask), where=cnt > 0)
    return _op((a.data * w).sum(axis=1, keepdims=True), (a,), lambda g: (g * w,))


def mean_rows(a: Tensor) -> Tensor:
    """Column-wise mean over rows (1 x cols)."""
    n = a.rows
    return _op(a.data.mean(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g / n, n, axis=0),))


def sum_cols(a: Tensor) -> Tensor:
    """Row sums (rows x 1)."""
    return _op(a.data.sum(axis=1, keepdims=True), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def sum_all(a: Tensor) -> Tensor:
    return _op(a.data.sum().reshape(1, 1), (a,), lambda g: (np.full(a.shape, g[0, 0]),))


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.data.size)


def inner_product(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"inner_product: shapes {a.shape} and {b.shape} differ")
    return _op(
        np.array([[np.sum(a.data * b.data)]]),
        (a, b),
        lambda g: (g[0, 0] * b.data, g[0, 0] * a.data),
    )


# -- gradient checking ------------------------------------------------------------


def tape_gradients(f: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = f()
        tape.backward(loss)
    return [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]


def grad_check(f: Callable[[], Tensor], params: Tensor | Sequence[Tensor], h: float = 1e-5) -> float:
    """Max over coordinates of ``|fd - tape| / max(1, |tape|)`` with central differences.

    ``f`` takes no arguments and reads ``params`` (which it may close over);
    coordinates are perturbed in place and restored.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    if isinstance(params, Tensor):
        params = [params]
    grads = tape_gradients(f, params)
    worst = 0.0
    for p, gr in zip(params, grads):
        if not np.all(np.isfinite(gr)):
            raise FloatingPointError(f"non-finite tape gradient for {p!r}")
        flat = p.data.reshape(-1)
        gflat = gr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f().item()
            flat[i] = orig - h
            fm = f().item()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise FloatingPointError(f"non-finite function value at coordinate {i} of {p!r}")
            fd = (fp - fm) / (2 * h)
            worst = max(worst, abs(fd - gflat[i]) / max(1.0, abs(gflat[i])))
    return worst


# -- init, GRU, Adam -----------------------------------------------------------


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape or (fan_in, fan_out))


@dataclass
class GRUParams:
    """Weights act on ``[prev, cand]`` (2d x d); biases are 1 x d."""

    W_z: Tensor
    b_z: Tensor
    W_r: Tensor
    b_r: Tensor
    W_h: Tensor
    b_h: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, d: int, prefix: str = "gru") -> "GRUParams":
        def w(n):
            return Tensor(xavier_uniform(rng, 2 * d, d), requires_grad=True, name=f"{prefix}.{n}")

        def b(n):
            return Tensor(np.zeros((1, d)), requires_grad=True, name=f"{prefix}.{n}")

        return cls(w("W_z"), b("b_z"), w("W_r"), b("b_r"), w("W_h"), b("b_h"))

    def tensors(self) -> dict[str, Tensor]:
        return {k: getattr(self, k) for k in ("W_z", "b_z", "W_r", "b_r", "W_h", "b_h")}


def gru_cell(prev: Tensor, cand: Tensor, p: GRUParams) -> Tensor:
    if prev.shape != cand.shape:
        raise ShapeError(f"gru_cell: prev {prev.shape} vs cand {cand.shape}")
    both = concat_cols([prev, cand])
    z = sigmoid(add(matmul(both, p.W_z), p.b_z))
    r = sigmoid(add(matmul(both, p.W_r), p.b_r))
    h_tilde = tanh(add(matmul(concat_cols([mul(r, prev), cand]), p.W_h), p.b_h))
    ones = Tensor(np.ones(z.shape))
    return add(mul(sub(ones, z), prev), mul(z, h_tilde))


@dataclass
class AdamState:
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    # optional per-parameter multipliers on lr, aligned with the params list
    lr_scale: list[float] = field(default_factory=list)
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(state: AdamState, params: Sequence[Tensor], grads: Sequence[np.ndarray | None]) -> Sequence[Tensor]:
    """Bias-corrected Adam update, in place.  A missing gradient counts as zero."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    grads = [np.zeros_like(p.data) if g is None else g for p, g in zip(params, grads)]
    for p, g, m in zip(params, grads, state.m):
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeError(f"gradient {g.shape} does not match parameter {p!r}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {p!r} at Adam step {state.step + 1}")
    scales = state.lr_scale or [1.0] * len(params)
    if len(scales) != len(params):
        raise ShapeError(f"{len(scales)} lr scales for {len(params)} parameters")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1 - b1**t, math.sqrt(1 - b2**t)
    for p, g, m, v, k in zip(params, grads, state.m, state.v, scales):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        # p -= lr * m_hat / (sqrt(v_hat) + eps), with the corrections folded into scalars
        denom = np.sqrt(v)
        denom /= c2
        denom += state.eps
        p.data -= (k * state.lr / c1) * (m / denom)
    return params
