"""Gradient check of the tiny reference classifier."""
from __future__ import annotations

import numpy as np

from mltc.gradcheck import grad_check
from mltc.model import ModelConfig, TransformerClassifier
from mltc.objectives import contrastive_loss, cross_entropy, total_loss

REFERENCE_TOLERANCE = 1e-4


def reference_config() -> ModelConfig:
    return ModelConfig(vocab_size=50, d_model=16, n_layers=2, n_heads=4, n_global=2, window=4,
                       num_classes=2, max_len=12, dropout_rate=0.0)


def reference_batch(seed: int, batch: int = 4, length: int = 12, vocab: int = 50) -> tuple:
    """Random tokens with ragged padding and alternating labels."""
    rng = np.random.default_rng(seed)
    tokens = rng.integers(2, vocab, size=(batch, length))
    lengths = rng.integers(length // 2, length + 1, size=batch)
    lengths[0] = length
    mask = np.arange(length)[None, :] < lengths[:, None]
    tokens[~mask] = 0
    return tokens, mask, np.arange(batch) % 2


def reference_loss_fn(model: TransformerClassifier, tokens, mask, labels, lam=0.5, tau=0.5, seed=0):
    """Deterministic L_CE + lam * L_CL closure over ``model``'s parameters."""
    def f(_params):
        logits, z = model.forward(tokens, mask, train=False)
        cl = contrastive_loss(z, labels, tau, rng=np.random.default_rng(seed))
        return total_loss(cross_entropy(logits, labels), cl, lam)
    return f


def check_reference_model(seed: int = 42, eps: float = 1e-3, max_entries=None) -> float:
    cfg = reference_config()
    model = TransformerClassifier(cfg, seed=seed)
    tokens, mask, labels = reference_batch(seed)
    f = reference_loss_fn(model, tokens, mask, labels, seed=seed)
    return grad_check(f, model.params, eps=eps, seed=seed, max_entries=max_entries)
