"""Reverse-mode differentiation over dense float64 matrices.

Every value is a rank-2 ``Tensor`` (scalars are 1x1).  Operations build a
DAG of closures; ``backward`` walks it in reverse topological order and
accumulates gradients additively at fan-out.  Only the primitives the
message-passing model actually needs are provided.
"""

from __future__ import annotations

import math

import numpy as np


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or infinity."""


_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (used for eval passes)."""

    def __enter__(self):
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._saved
        return False


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ValueError(f"rank-{arr.ndim} tensors are not supported")
    return arr


def _check_finite(arr: np.ndarray):
    # One-pass check: a sum over finite values of sane magnitude cannot
    # overflow, so a non-finite sum pinpoints a non-finite entry.
    s = np.add.reduce(arr, axis=None)
    if not math.isfinite(s):
        if not np.isfinite(arr).all():
            raise NonFiniteError("tensor contains NaN or Inf")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_matrix(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError("item() requires a scalar tensor")
        return float(self.data[0, 0])

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    _check_finite(data)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    track = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = track
    if track:
        out._parents = parents
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def backward(loss: Tensor):
    """Populate ``grad`` on every tensor the scalar ``loss`` depends on."""
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    if not loss.requires_grad:
        raise ValueError("loss is not connected to any learnable tensor")

    # Iterative topological sort: recursion would overflow on deep graphs.
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones((1, 1))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _result(out_data, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch {a.shape} vs {b.shape}")
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _result(out_data, (a, b), bwd)


def broadcast_row_add(x: Tensor, row: Tensor) -> Tensor:
    """x (n x d) plus a single row (1 x d) broadcast over all rows."""
    if row.data.shape[0] != 1 or row.data.shape[1] != x.data.shape[1]:
        raise ValueError(f"broadcast shape mismatch {x.shape} + {row.shape}")
    out_data = x.data + row.data

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g)
        if row.requires_grad:
            row._accumulate(g.sum(axis=0, keepdims=True))

    return _result(out_data, (x, row), bwd)


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out_data = x.data * c

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * c)

    return _result(out_data, (x,), bwd)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0  # subgradient at exactly 0 is 0
    out_data = np.where(mask, x.data, 0.0)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return _result(out_data, (x,), bwd)


def row_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        if x.requires_grad:
            y = out_data
            x._accumulate(y * (g - (g * y).sum(axis=1, keepdims=True)))

    return _result(out_data, (x,), bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit variance, then affine."""
    d = x.data.shape[1]
    if gain.data.shape != (1, d) or bias.data.shape != (1, d):
        raise ValueError("layer_norm gain/bias must be 1 x d rows")
    mu = np.add.reduce(x.data, axis=1, keepdims=True)
    mu /= d
    centered = x.data - mu
    var = np.add.reduce(centered * centered, axis=1, keepdims=True)
    var /= d
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out_data = xhat * gain.data + bias.data

    def bwd(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).sum(axis=0, keepdims=True))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0, keepdims=True))
        if x.requires_grad:
            gxh = g * gain.data
            mean_g = np.add.reduce(gxh, axis=1, keepdims=True) / d
            mean_gx = np.add.reduce(gxh * xhat, axis=1, keepdims=True) / d
            x._accumulate(inv * (gxh - mean_g - xhat * mean_gx))

    return _result(out_data, (x, gain, bias), bwd)


def hstack(tensors: list[Tensor]) -> Tensor:
    if not tensors:
        raise ValueError("hstack needs at least one tensor")
    if len(tensors) == 1:
        return tensors[0]
    rows = tensors[0].data.shape[0]
    if any(t.data.shape[0] != rows for t in tensors):
        raise ValueError("hstack row mismatch")
    out_data = np.concatenate([t.data for t in tensors], axis=1)
    offsets = np.cumsum([0] + [t.data.shape[1] for t in tensors])

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                t._accumulate(g[:, lo:hi])

    return _result(out_data, tuple(tensors), bwd)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    return hstack([a, b])


def concat_rows(tensors: list[Tensor]) -> Tensor:
    if not tensors:
        raise ValueError("concat_rows needs at least one tensor")
    out_data = np.concatenate([t.data for t in tensors], axis=0)
    offsets = np.cumsum([0] + [t.data.shape[0] for t in tensors])

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                t._accumulate(g[lo:hi])

    return _result(out_data, tuple(tensors), bwd)


def mean_rows(x: Tensor) -> Tensor:
    n = x.data.shape[0]
    out_data = x.data.mean(axis=0, keepdims=True)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(np.repeat(g / n, n, axis=0))

    return _result(out_data, (x,), bwd)


def sum_all(x: Tensor) -> Tensor:
    out_data = np.array([[x.data.sum()]])

    def bwd(g):
        if x.requires_grad:
            x._accumulate(np.full_like(x.data, g[0, 0]))

    return _result(out_data, (x,), bwd)


def gather_rows(x: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.intp)
    out_data = x.data[idx]

    def bwd(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.add.at(gx, idx, g)
            x._accumulate(gx)

    return _result(out_data, (x,), bwd)


def tile_rows(x: Tensor, reps: int) -> Tensor:
    n = x.data.shape[0]
    out_data = np.tile(x.data, (reps, 1))

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g.reshape(reps, n, -1).sum(axis=0))

    return _result(out_data, (x,), bwd)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        # Identity pass-through outside training keeps the tape minimal.
        return x
    if rng is None:
        raise ValueError("training-mode dropout requires an rng")
    mask = (rng.random(x.data.shape) >= p) / (1.0 - p)
    out_data = x.data * mask

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return _result(out_data, (x,), bwd)


def cross_entropy_from_logits(logits: Tensor, targets) -> Tensor:
    """Mean cross-entropy of integer ``targets`` under row-wise logits."""
    t = np.asarray(targets, dtype=np.intp).reshape(-1)
    n, c = logits.data.shape
    if t.shape[0] != n:
        raise ValueError(f"{t.shape[0]} targets for {n} logit rows")
    if t.min(initial=0) < 0 or (n > 0 and t.max() >= c):
        raise ValueError("target out of class range")
    m = logits.data.max(axis=1, keepdims=True)
    e = np.exp(logits.data - m)
    z = e.sum(axis=1, keepdims=True)
    log_probs = logits.data - m - np.log(z)
    out_data = np.array([[-log_probs[np.arange(n), t].mean()]])

    def bwd(g):
        if logits.requires_grad:
            grad = e / z
            grad[np.arange(n), t] -= 1.0
            logits._accumulate(grad * (g[0, 0] / n))

    return _result(out_data, (logits,), bwd)


_MASK_BIAS = -1e30  # finite, yet exp(bias - max) underflows to exactly 0


def attention(q: Tensor, k: Tensor, v: Tensor, nq: int | None = None,
              nk: int | None = None, heads: int = 1,
              key_mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention over uniform row groups and heads.

    Rows of ``q`` are split into consecutive groups of ``nq`` rows and
    rows of ``k``/``v`` into groups of ``nk``; attention is computed
    independently within each group.  With ``heads`` > 1 the columns are
    additionally split into equal head blocks, attended independently at
    per-head scaling, and re-concatenated: the output equals running
    single-head attention per column block and stacking the results.
    ``key_mask`` (bool, one entry per key row) excludes padding keys:
    they receive exactly zero weight and exactly zero gradient.
    """
    if nq is None:
        nq = q.data.shape[0]
    if nk is None:
        nk = k.data.shape[0]
    dk = q.data.shape[1]
    if k.data.shape[1] != dk:
        raise ValueError(f"query/key width mismatch {q.shape} vs {k.shape}")
    if k.data.shape[0] != v.data.shape[0]:
        raise ValueError(f"key/value row mismatch {k.shape} vs {v.shape}")
    if q.data.shape[0] % nq or k.data.shape[0] % nk:
        raise ValueError("rows not divisible by group size")
    g = q.data.shape[0] // nq
    if k.data.shape[0] // nk != g:
        raise ValueError("query and key group counts differ")
    dv = v.data.shape[1]
    if dk % heads or dv % heads:
        raise ValueError(f"widths {dk}/{dv} not divisible by {heads} heads")
    dkh = dk // heads
    dvh = dv // heads
    inv_sqrt = 1.0 / math.sqrt(dkh)

    def split(arr, rows, width):
        # (g*rows, heads*width) -> (g, heads, rows, width) head batches
        return arr.reshape(g, rows, heads, width).transpose(0, 2, 1, 3)

    def merge(arr, rows, width):
        return arr.transpose(0, 2, 1, 3).reshape(g * rows, heads * width)

    q4 = split(q.data, nq, dkh)
    k4 = split(k.data, nk, dkh)
    v4 = split(v.data, nk, dvh)
    s = np.matmul(q4, k4.transpose(0, 1, 3, 2)) * inv_sqrt
    if key_mask is not None:
        s += np.where(key_mask, 0.0, _MASK_BIAS).reshape(g, 1, 1, nk)
    s -= s.max(axis=3, keepdims=True)
    a = np.exp(s)
    a /= a.sum(axis=3, keepdims=True)
    out_data = merge(np.matmul(a, v4), nq, dvh)

    def bwd(grad):
        g4 = split(grad, nq, dvh)
        if v.requires_grad:
            v._accumulate(merge(np.matmul(a.transpose(0, 1, 3, 2), g4), nk, dvh))
        if q.requires_grad or k.requires_grad:
            da = np.matmul(g4, v4.transpose(0, 1, 3, 2))
            ds = a * (da - (da * a).sum(axis=3, keepdims=True))
            if q.requires_grad:
                q._accumulate(merge(np.matmul(ds, k4) * inv_sqrt, nq, dkh))
            if k.requires_grad:
                k._accumulate(
                    merge(np.matmul(ds.transpose(0, 1, 3, 2), q4) * inv_sqrt,
                          nk, dkh))

    return _result(out_data, (q, k, v), bwd)


# ---------------------------------------------------------------------------
# parameter store and optimizer
# ---------------------------------------------------------------------------

class ParamStore:
    """Named learnable tensors plus their Adam state."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def num_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grads(self):
        for t in self._params.values():
            t.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for name, t in self._params.items():
            if name not in state:
                raise KeyError(f"missing parameter {name!r} in state")
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: {arr.shape} vs {t.data.shape}")
            t.data = arr.copy()


def adam_step(store: ParamStore, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update; parameters without grads are skipped."""
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in store.items():
        if p.grad is None:
            continue
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * p.grad
        v *= beta2
        v += (1.0 - beta2) * (p.grad * p.grad)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
