"""Scaled dot-product attention and the global/local multi-level variant.

Heads are split into two groups inside one multi-head block: the first
``n_global`` heads attend over every real token, the remaining heads only
over a band of half-width ``window`` around each query. Head outputs are
concatenated in head order and mixed by ``W_o``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from mltc.errors import ShapeMismatch
from mltc.tensor import Tensor, create, matmul, reshape, scale, softmax_rows, swap_last, transpose


@dataclass
class AttentionParams:
    W_q: Tensor
    W_k: Tensor
    W_v: Tensor
    W_o: Tensor
    n_heads: int
    n_global: int
    window: int

    def __post_init__(self):
        d_model = self.W_q.shape[0]
        if d_model % self.n_heads:
            raise ValueError(f"d_model {d_model} not divisible by n_heads {self.n_heads}")
        # n_global == n_heads is the all-global baseline used by ablations
        if not 1 <= self.n_global <= self.n_heads:
            raise ValueError(f"n_global must lie in [1, n_heads], got {self.n_global}")
        if self.window < 0:
            raise ValueError("window must be >= 0")

    @property
    def d_model(self) -> int:
        return self.W_q.shape[0]

    @property
    def d_k(self) -> int:
        return self.d_model // self.n_heads

    @property
    def is_multi_level(self) -> bool:
        return self.n_global < self.n_heads

    def tensors(self) -> dict:
        return {"W_q": self.W_q, "W_k": self.W_k, "W_v": self.W_v, "W_o": self.W_o}

    @classmethod
    def init(cls, d_model, n_heads, n_global, window, rng) -> "AttentionParams":
        a = 1.0 / math.sqrt(d_model)
        ws = [create((d_model, d_model), "uniform", a=a, seed=rng, requires_grad=True) for _ in range(4)]
        return cls(*ws, n_heads=n_heads, n_global=n_global, window=window)


def scaled_dot_attention(Q: Tensor, K: Tensor, V: Tensor, mask=None, return_weights: bool = False):
    """softmax(Q K^T / sqrt(d_k), mask) V over the last two axes."""
    if Q.shape[-1] != K.shape[-1] or K.shape[-2] != V.shape[-2]:
        raise ShapeMismatch(f"attention shapes Q{Q.shape} K{K.shape} V{V.shape}")
    scores = scale(matmul(Q, swap_last(K)), 1.0 / math.sqrt(Q.shape[-1]))
    weights = softmax_rows(scores, mask)
    out = matmul(weights, V)
    return (out, weights.data) if return_weights else out


def padding_mask(L: int, pad_mask=None) -> np.ndarray:
    """[L, L] mask admitting every real key."""
    keys = np.ones(L, dtype=bool) if pad_mask is None else np.asarray(pad_mask, dtype=bool)
    return np.broadcast_to(keys, (L, L)).copy()


def local_window_mask(L: int, w: int, pad_mask=None) -> np.ndarray:
    """[L, L] mask: (i, j) admitted iff |i - j| <= w and j is a real token."""
    if L < 1 or w < 0:
        raise ValueError("need L >= 1 and w >= 0")
    idx = np.arange(L)
    band = np.abs(idx[:, None] - idx[None, :]) <= w
    return band & padding_mask(L, pad_mask)


def head_masks(pad_mask: np.ndarray, n_heads: int, n_global: int, window: int) -> np.ndarray:
    """Boolean [B, n_heads, L, L] masks for a batch of pad masks [B, L]."""
    pad_mask = np.asarray(pad_mask, dtype=bool)
    B, L = pad_mask.shape
    glob = np.broadcast_to(pad_mask[:, None, :], (B, L, L))
    idx = np.arange(L)
    band = np.abs(idx[:, None] - idx[None, :]) <= window
    local = glob & band
    # a padded query can have no real key inside its band; such rows fall
    # back to self-attention (their outputs never reach real positions)
    empty = ~local.any(axis=-1)
    local = local | (np.eye(L, dtype=bool) & empty[:, :, None])
    masks = np.empty((B, n_heads, L, L), dtype=bool)
    masks[:, :n_global] = glob[:, None]
    masks[:, n_global:] = local[:, None]
    return masks


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    B, L, d = x.shape
    return transpose(reshape(x, (B, L, n_heads, d // n_heads)), (0, 2, 1, 3))


def multi_level_attention(X: Tensor, p: AttentionParams, pad_mask=None,
                          return_weights: bool = False):
    """Multi-head self-attention with global and local head groups.

    ``X`` is [L, d_model] or [B, L, d_model]; ``pad_mask`` matches its
    leading dims (True on real tokens). With ``return_weights`` the
    [B, n_heads, L, L] attention weights are returned alongside the output.
    """
    single = X.ndim == 2
    if single:
        X = reshape(X, (1,) + X.shape)
    B, L, d = X.shape
    if pad_mask is None:
        pad_mask = np.ones((B, L), dtype=bool)
    pad_mask = np.asarray(pad_mask, dtype=bool).reshape(B, L)
    masks = head_masks(pad_mask, p.n_heads, p.n_global, p.window)

    Q = _split_heads(matmul(X, p.W_q), p.n_heads)
    K = _split_heads(matmul(X, p.W_k), p.n_heads)
    V = _split_heads(matmul(X, p.W_v), p.n_heads)
    heads, weights = scaled_dot_attention(Q, K, V, masks, return_weights=True)
    merged = reshape(transpose(heads, (0, 2, 1, 3)), (B, L, d))
    out = matmul(merged, p.W_o)
    if single:
        out = reshape(out, (L, d))
    return (out, weights) if return_weights else out


def write_attention_tsv(weights: np.ndarray, path, n_global: Optional[int] = None):
    """Dump [B, H, L, L] attention weights as ``batch head level query key weight`` rows."""
    B, H, L, _ = weights.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("batch\thead\tlevel\tquery\tkey\tweight\n")
        for b in range(B):
            for h in range(H):
                level = "global" if n_global is None or h < n_global else "local"
                for i in range(L):
                    for j in range(L):
                        fh.write(f"{b}\t{h}\t{level}\t{i}\t{j}\t{float(weights[b, h, i, j])!r}\n")
