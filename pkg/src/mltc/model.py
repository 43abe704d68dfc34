"""Transformer text classifier with multi-level attention and a bottleneck FFN."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from mltc.attention import AttentionParams, multi_level_attention
from mltc.errors import DegenerateMask
from mltc.tensor import (Tensor, add, create, dropout, embedding, layer_norm, matmul,
                         normalize_rows, relu, reshape)


@dataclass
class ModelConfig:
    vocab_size: int = 20000
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    n_global: int = 2
    window: int = 4
    d_reduced: Optional[int] = None
    d_proj: Optional[int] = None
    num_classes: int = 2
    max_len: int = 256
    dropout_rate: float = 0.1
    # ablation switches: all-global heads / standard 4x FFN when False
    multi_level: bool = True
    lightweight: bool = True

    def __post_init__(self):
        if self.d_reduced is None:
            self.d_reduced = max(1, self.d_model // 2)
        if self.d_proj is None:
            self.d_proj = max(1, self.d_model // 2)
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if not self.d_reduced < 4 * self.d_model:
            raise ValueError("d_reduced must be < 4 * d_model")
        if ffn_param_count(self.d_model, self.d_reduced) >= standard_ffn_param_count(self.d_model):
            raise ValueError("bottleneck FFN is not smaller than the standard FFN")
        if self.multi_level and not 1 <= self.n_global <= self.n_heads - 1:
            raise ValueError("multi-level attention needs 1 <= n_global <= n_heads - 1")
        if self.window < 0 or self.n_layers < 0 or self.max_len < 1 or self.vocab_size < 3:
            raise ValueError("invalid window / n_layers / max_len / vocab_size")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def ffn_width(self) -> int:
        return self.d_reduced if self.lightweight else 4 * self.d_model

    @property
    def effective_n_global(self) -> int:
        return self.n_global if self.multi_level else self.n_heads

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def ffn_param_count(d_model: int, d_hidden: int) -> int:
    """Weights and biases of a d_model -> d_hidden -> d_model FFN."""
    return 2 * d_model * d_hidden + d_hidden + d_model


def standard_ffn_param_count(d_model: int) -> int:
    return ffn_param_count(d_model, 4 * d_model)  # 8 d^2 + 5 d


def init_params(cfg: ModelConfig, seed=0) -> dict:
    rng = np.random.default_rng(seed)
    d, h = cfg.d_model, cfg.ffn_width

    def uniform(shape, fan_in):
        return create(shape, "uniform", a=1.0 / math.sqrt(fan_in), seed=rng, requires_grad=True)

    def const(shape, v):
        return create(shape, "constant", value=v, requires_grad=True)

    params = {
        "token_embedding": create((cfg.vocab_size, d), "uniform", a=0.1, seed=rng, requires_grad=True),
        "positional_embedding": create((cfg.max_len, d), "uniform", a=0.1, seed=rng, requires_grad=True),
    }
    for i in range(cfg.n_layers):
        pre = f"layers.{i}."
        for name in ("W_q", "W_k", "W_v", "W_o"):
            params[pre + "attn." + name] = uniform((d, d), d)
        params[pre + "ffn.W1"] = uniform((d, h), d)
        params[pre + "ffn.b1"] = const((h,), 0.0)
        params[pre + "ffn.W2"] = uniform((h, d), h)
        params[pre + "ffn.b2"] = const((d,), 0.0)
        for ln in ("ln1", "ln2"):
            params[pre + ln + ".gamma"] = const((d,), 1.0)
            params[pre + ln + ".beta"] = const((d,), 0.0)
    params["classifier.W"] = uniform((d, cfg.num_classes), d)
    params["classifier.b"] = const((cfg.num_classes,), 0.0)
    params["projection.W"] = uniform((d, cfg.d_proj), d)
    params["projection.b"] = const((cfg.d_proj,), 0.0)
    return params


def lightweight_ffn(X: Tensor, W1: Tensor, b1: Tensor, W2: Tensor, b2: Tensor) -> Tensor:
    """Position-wise W2 relu(W1 x + b1) + b2."""
    return add(matmul(relu(add(matmul(X, W1), b1)), W2), b2)


def pool(H: Tensor, pad_mask) -> Tensor:
    """Mean over real positions: [B, L, d] -> [B, d]."""
    mask = np.asarray(pad_mask, dtype=np.float64)
    counts = mask.sum(axis=1, keepdims=True)
    if (counts == 0).any():
        raise DegenerateMask("cannot pool a row with no real tokens")
    weights = Tensor((mask / counts)[:, None, :])
    pooled = matmul(weights, H)
    return reshape(pooled, (H.shape[0], H.shape[2]))


class TransformerClassifier:
    """Embeddings, encoder stack, mean pooling, classifier and projection heads."""

    def __init__(self, config: ModelConfig, params: Optional[dict] = None, seed=0):
        self.config = config
        self.params = init_params(config, seed) if params is None else params

    def parameters(self) -> list:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def attention_params(self, layer: int) -> AttentionParams:
        pre = f"layers.{layer}.attn."
        c = self.config
        return AttentionParams(self.params[pre + "W_q"], self.params[pre + "W_k"],
                               self.params[pre + "W_v"], self.params[pre + "W_o"],
                               n_heads=c.n_heads, n_global=c.effective_n_global, window=c.window)

    def embed(self, tokens) -> Tensor:
        tokens = np.asarray(tokens, dtype=np.int64)
        L = tokens.shape[-1]
        if L > self.config.max_len:
            raise IndexError(f"sequence length {L} exceeds max_len {self.config.max_len}")
        pos = embedding(self.params["positional_embedding"], np.arange(L))
        return add(embedding(self.params["token_embedding"], tokens), pos)

    def encode(self, tokens, pad_mask, train: bool = False, rng=None, attention_sink=None) -> Tensor:
        """Hidden states [B, L, d_model]; dropout only when ``train``."""
        p, rate = self.params, self.config.dropout_rate
        x = self.embed(tokens)
        for i in range(self.config.n_layers):
            pre = f"layers.{i}."
            att, w = multi_level_attention(x, self.attention_params(i), pad_mask, return_weights=True)
            if attention_sink is not None:
                attention_sink.append(w)
            x = layer_norm(add(x, dropout(att, rate, rng, train)), p[pre + "ln1.gamma"], p[pre + "ln1.beta"])
            ff = lightweight_ffn(x, p[pre + "ffn.W1"], p[pre + "ffn.b1"], p[pre + "ffn.W2"], p[pre + "ffn.b2"])
            x = layer_norm(add(x, dropout(ff, rate, rng, train)), p[pre + "ln2.gamma"], p[pre + "ln2.beta"])
        return x

    def classify(self, pooled: Tensor) -> Tensor:
        return add(matmul(pooled, self.params["classifier.W"]), self.params["classifier.b"])

    def project(self, pooled: Tensor) -> Tensor:
        z = add(matmul(pooled, self.params["projection.W"]), self.params["projection.b"])
        return normalize_rows(z, eps=1e-12)

    def forward(self, tokens, pad_mask, train: bool = False, rng=None) -> tuple:
        """(logits [B, C], unit-norm projections [B, d_proj])."""
        pooled = pool(self.encode(tokens, pad_mask, train, rng), pad_mask)
        return self.classify(pooled), self.project(pooled)

    def logits(self, tokens, pad_mask) -> np.ndarray:
        pooled = pool(self.encode(tokens, pad_mask), pad_mask)
        return self.classify(pooled).data
