"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from typing import Callable, Mapping, Optional, Union

import numpy as np

from mltc.errors import NonFiniteLoss
from mltc.tensor import Tensor, zero_grads

Params = Union[Mapping[str, Tensor], list]


def _named(params: Params) -> list:
    if isinstance(params, Mapping):
        return list(params.items())
    return [(str(i), p) for i, p in enumerate(params)]


def _value(f, params) -> float:
    v = float(np.asarray(f(params).data).reshape(-1)[0])
    if not np.isfinite(v):
        raise NonFiniteLoss(f"loss evaluated to {v}")
    return v


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)


def grad_check(f: Callable[[Params], Tensor], params: Params, eps: float = 1e-5, seed=None,
               max_entries: Optional[int] = None) -> float:
    """Max relative error between backprop gradients and central differences.

    ``f(params)`` must be deterministic and return a scalar tensor. Every
    entry of every parameter is perturbed unless ``max_entries`` caps the
    number of entries per tensor, in which case they are sampled with
    ``seed``.
    """
    if not 1e-6 <= eps <= 1e-2:
        raise ValueError(f"eps must lie in [1e-6, 1e-2], got {eps}")
    named = _named(params)
    tensors = [p for _, p in named]
    zero_grads(tensors)
    loss = f(params)
    if not np.all(np.isfinite(loss.data)):
        raise NonFiniteLoss("loss is not finite")
    loss.backward()
    rng = np.random.default_rng(seed)

    worst = 0.0
    for _, p in named:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        size = p.data.size
        idx = np.arange(size)
        if max_entries is not None and size > max_entries:
            idx = np.sort(rng.choice(size, size=max_entries, replace=False))
        numeric = np.empty(idx.size)
        for n, i in enumerate(idx):
            pos = np.unravel_index(i, p.shape)
            orig = p.data[pos]
            p.data[pos] = orig + eps
            up = _value(f, params)
            p.data[pos] = orig - eps
            down = _value(f, params)
            p.data[pos] = orig
            numeric[n] = (up - down) / (2.0 * eps)
        if idx.size:
            err = relative_error(analytic.reshape(-1)[idx], numeric)
            worst = max(worst, float(err.max()))
    zero_grads(tensors)
    return worst
