"""Adam with bias correction and optional global-norm gradient clipping."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from mltc.errors import NonFiniteGradient


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def clip_by_global_norm(grads: dict, max_norm: Optional[float]) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``; return the pre-clip norm."""
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm is not None and norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm


def adam_step(params: dict, state: AdamState, lr: float = 3e-4, betas=(0.9, 0.999),
              eps: float = 1e-8, clip_norm: Optional[float] = 1.0) -> AdamState:
    """One in-place update of every parameter, then reset their gradients.

    Parameters without a gradient are treated as having a zero gradient.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p.data) if p.grad is None else np.array(p.grad, dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(name)
        grads[name] = g
    clip_by_global_norm(grads, clip_norm)

    b1, b2 = betas
    state.step += 1
    t = state.step
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1.0 - b1) * g if m is None else b1 * m + (1.0 - b1) * g
        v = (1.0 - b2) * g * g if v is None else b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.grad = None
    return state
