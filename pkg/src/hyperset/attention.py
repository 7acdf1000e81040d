"""Attention building blocks: scaled dot-product, multihead, MAB, ISAB.

The multihead attention block is

    mab(Q, K) = LayerNorm(H + FFN(H)),  H = LayerNorm(Q + Multihead(Q, K, K))

with the output projection fixed to the identity and an FFN of one hidden
relu layer that preserves width.  Induced set attention adapts a set S of
row embeddings through m learnable inducing points:

    induced_set_attention(S) = mab(S, mab(I, S))

which costs O(m * n) instead of the O(n^2) of all-pair self-attention and
is exactly permutation-equivariant in the rows of S.

Every op takes optional uniform group sizes (``nq``/``nk``) so one call can
process a whole bucket of same-size sets; attention never crosses group
boundaries and all other ops are row-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class MabParams:
    # per-head d x (d/h) query/key/value projections, stored stacked
    # column-wise (head i occupies columns [i*d/h, (i+1)*d/h))
    wq: Tensor
    wk: Tensor
    wv: Tensor
    heads: int
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor


@dataclass
class InducedAttnParams:
    points: Tensor  # m x d, shared globally across all sets
    inner: MabParams
    outer: MabParams

    @property
    def num_points(self) -> int:
        return int(self.points.data.shape[0])


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_mab_params(store: ad.ParamStore, prefix: str, dim: int, heads: int,
                    rng: np.random.Generator) -> MabParams:
    if dim % heads:
        raise ValueError(f"width {dim} not divisible by {heads} heads")
    dh = dim // heads

    def head_blocks():
        # Xavier per d x (d/h) head projection, stacked for storage
        return np.concatenate([xavier(rng, dim, dh) for _ in range(heads)], axis=1)

    return MabParams(
        wq=store.add(f"{prefix}.wq", head_blocks()),
        wk=store.add(f"{prefix}.wk", head_blocks()),
        wv=store.add(f"{prefix}.wv", head_blocks()),
        heads=heads,
        ffn_w1=store.add(f"{prefix}.ffn_w1", xavier(rng, dim, dim)),
        ffn_b1=store.add(f"{prefix}.ffn_b1", np.zeros((1, dim))),
        ffn_w2=store.add(f"{prefix}.ffn_w2", xavier(rng, dim, dim)),
        ffn_b2=store.add(f"{prefix}.ffn_b2", np.zeros((1, dim))),
        ln1_gain=store.add(f"{prefix}.ln1_gain", np.ones((1, dim))),
        ln1_bias=store.add(f"{prefix}.ln1_bias", np.zeros((1, dim))),
        ln2_gain=store.add(f"{prefix}.ln2_gain", np.ones((1, dim))),
        ln2_bias=store.add(f"{prefix}.ln2_bias", np.zeros((1, dim))),
    )


def init_induced_params(store: ad.ParamStore, prefix: str, dim: int, heads: int,
                        num_points: int, rng: np.random.Generator) -> InducedAttnParams:
    if num_points < 1:
        raise ValueError("need at least one inducing point")
    return InducedAttnParams(
        points=store.add(f"{prefix}.points", xavier(rng, num_points, dim)),
        inner=init_mab_params(store, f"{prefix}.inner", dim, heads, rng),
        outer=init_mab_params(store, f"{prefix}.outer", dim, heads, rng),
    )


def sdpa(q: Tensor, k: Tensor, v: Tensor, nq: int | None = None,
         nk: int | None = None) -> Tensor:
    """softmax(Q K^T / sqrt(d_k)) V; each weight row sums to 1."""
    return ad.attention(q, k, v, nq=nq, nk=nk)


def multihead(q: Tensor, k: Tensor, v: Tensor, wq: list[Tensor],
              wk: list[Tensor], wv: list[Tensor], nq: int | None = None,
              nk: int | None = None,
              key_mask: np.ndarray | None = None) -> Tensor:
    """Concatenated per-head attention on projected subspaces (W^O = identity).

    Takes per-head d x (d/h) projection matrices; they are stacked and run
    as one batched attention call, which is identical to attending each
    projected subspace separately and concatenating the results.
    """
    heads = len(wq)
    return ad.attention(ad.matmul(q, ad.hstack(list(wq))),
                        ad.matmul(k, ad.hstack(list(wk))),
                        ad.matmul(v, ad.hstack(list(wv))),
                        nq=nq, nk=nk, heads=heads, key_mask=key_mask)


def mab(q: Tensor, k: Tensor, params: MabParams, nq: int | None = None,
        nk: int | None = None, dropout: float = 0.0, training: bool = False,
        rng: np.random.Generator | None = None,
        key_mask: np.ndarray | None = None) -> Tensor:
    """Multihead attention block; K serves as both keys and values."""
    attended = ad.attention(ad.matmul(q, params.wq), ad.matmul(k, params.wk),
                            ad.matmul(k, params.wv), nq=nq, nk=nk,
                            heads=params.heads, key_mask=key_mask)
    hidden = ad.layer_norm(ad.add(q, attended), params.ln1_gain, params.ln1_bias)
    ffn = ad.matmul(ad.relu(ad.broadcast_row_add(
        ad.matmul(hidden, params.ffn_w1), params.ffn_b1)), params.ffn_w2)
    ffn = ad.broadcast_row_add(ffn, params.ffn_b2)
    ffn = ad.dropout(ffn, dropout, training, rng)
    return ad.layer_norm(ad.add(hidden, ffn), params.ln2_gain, params.ln2_bias)


def induced_set_attention(s: Tensor, params: InducedAttnParams,
                          set_size: int | None = None, dropout: float = 0.0,
                          training: bool = False,
                          rng: np.random.Generator | None = None,
                          key_mask: np.ndarray | None = None) -> Tensor:
    """Adapt each row of S by attending within its set through inducing points.

    ``set_size`` is the uniform per-group row count (defaults to all of S
    as one set).  Output row i is the set-dependent embedding of input
    row i; permuting rows within a set permutes outputs identically.
    ``key_mask`` marks padding rows of S, which are excluded from both
    attention passes (their own output rows carry no meaning).
    """
    n = s.data.shape[0] if set_size is None else set_size
    if s.data.shape[0] % n:
        raise ValueError("rows not divisible by set size")
    groups = s.data.shape[0] // n
    m = params.num_points
    queries = ad.tile_rows(params.points, groups) if groups > 1 else params.points
    summary = mab(queries, s, params.inner, nq=m, nk=n,
                  dropout=dropout, training=training, rng=rng, key_mask=key_mask)
    return mab(s, summary, params.outer, nq=n, nk=m,
               dropout=dropout, training=training, rng=rng)
