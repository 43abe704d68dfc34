"""Dense float64 tensors with a dynamic tape for reverse-mode autodiff.

Every public op records its inputs and a backward closure on the output
tensor. Calling ``backward()`` on a scalar walks the recorded graph in
reverse topological order and accumulates gradients into the ``grad`` slot
of every leaf tensor that has ``requires_grad=True``.

Broadcasting is restricted to scalars and trailing-suffix ("row") shapes,
which is all the encoder needs (biases, layer-norm gains).
"""
from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from mltc.errors import DegenerateMask, InvalidShape, NotScalar, ShapeMismatch

DTYPE = np.float64
LAYER_NORM_EPS = 1e-5

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (),
                 _backward: Optional[BackwardFn] = None, _op: str = ""):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Accumulate d(self)/d(leaf) into every requires_grad leaf."""
        if self.size != 1:
            raise NotScalar(f"backward needs a scalar, got shape {self.shape}")
        order = topological_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def topological_order(root: Tensor) -> list:
    """Nodes reachable from ``root``, every node after all of its inputs."""
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward, op):
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward, op)
    return Tensor(data, False, (), None, op)


def create(shape: Sequence[int], init="zeros", value: float = 0.0, a: float = 0.1,
           seed=None, requires_grad: bool = False) -> Tensor:
    """Build a tensor of ``shape`` filled by ``init`` (zeros, constant or uniform)."""
    shape = tuple(int(d) for d in shape)
    if not shape or any(d < 1 for d in shape):
        raise InvalidShape(f"invalid shape {shape}")
    if init == "zeros":
        data = np.zeros(shape, dtype=DTYPE)
    elif init == "constant":
        data = np.full(shape, value, dtype=DTYPE)
    elif init == "uniform":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        data = rng.uniform(-a, a, size=shape)
    else:
        raise ValueError(f"unknown init {init!r}")
    return Tensor(data, requires_grad=requires_grad)


def _check_broadcast(a: np.ndarray, b: np.ndarray):
    if a.shape == b.shape or a.size == 1 or b.size == 1:
        return
    short, long_ = (a, b) if a.ndim <= b.ndim else (b, a)
    if short.ndim and long_.shape[long_.ndim - short.ndim:] == short.shape:
        return
    raise ShapeMismatch(f"cannot broadcast {a.shape} with {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, d in enumerate(shape):
        if d == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data)
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data)
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape),
                              _unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data)
    out = a.data / b.data
    return _result(out, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * out / b.data, b.shape)), "div")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _result(x.data * c, (x,), lambda g: (g * c,), "scale")


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return _result(np.where(pos, x.data, 0.0), (x,), lambda g: (g * pos,), "relu")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _result(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return _result(y, (x,), lambda g: (g * y,), "exp")


def log(x: Tensor) -> Tensor:
    return _result(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(out, (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return scale(sum_(x, axis, keepdims), 1.0 / n)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product; ``b`` may be 2-D and shared across the batch."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeMismatch(f"matmul batch dims {a.shape} @ {b.shape}")

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            if b.ndim == 2 and gb.ndim > 2:
                gb = gb.reshape(-1, *gb.shape[-2:]).sum(axis=0)
        return ga, gb

    return _result(a.data @ b.data, (a, b), backward, "matmul")


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from None
    return _result(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    return _result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),), "transpose")


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    splits = np.cumsum(sizes)[:-1]
    return _result(np.concatenate([x.data for x in xs], axis=axis), xs,
                   lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup ``table[ids]``; ids may have any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"token id out of range [0, {table.shape[0]})")

    def backward(g):
        out = np.zeros_like(table.data)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (out,)

    return _result(table.data[ids], (table,), backward, "embedding")


def _masked_input(x: np.ndarray, mask) -> tuple:
    if mask is None:
        return x, None
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    if not mask.any(axis=-1).all():
        raise DegenerateMask("softmax row with every entry masked")
    return np.where(mask, x, -np.inf), mask


def softmax_rows(x: Tensor, mask=None) -> Tensor:
    """Softmax over the last axis; masked-out entries get weight exactly 0."""
    z, mask = _masked_input(x.data, mask)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _result(y, (x,), backward, "softmax")


def log_softmax_rows(x: Tensor, mask=None) -> Tensor:
    """Log-softmax over the last axis via log-sum-exp; masked entries read 0."""
    z, mask = _masked_input(x.data, mask)
    m = z.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(z - m).sum(axis=-1, keepdims=True))
    out = z - lse
    y = np.exp(out)
    if mask is not None:
        out = np.where(mask, out, 0.0)

    def backward(g):
        if mask is not None:
            g = np.where(mask, g, 0.0)
        return (g - y * g.sum(axis=-1, keepdims=True),)

    return _result(out, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    if gamma.shape != x.shape[-1:] or beta.shape != x.shape[-1:]:
        raise ShapeMismatch(f"layer_norm gains {gamma.shape}/{beta.shape} vs input {x.shape}")
    n = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def backward(g):
        dxhat = g * gamma.data
        dx = inv / n * (n * dxhat - dxhat.sum(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _result(xhat * gamma.data + beta.data, (x, gamma, beta), backward, "layer_norm")


def normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """x / (||x||_2 + eps) along the last axis."""
    norm = np.sqrt((x.data * x.data).sum(axis=-1, keepdims=True))
    s = norm + eps
    y = x.data / s

    def backward(g):
        proj = (x.data * g).sum(axis=-1, keepdims=True)
        safe = np.where(norm > 0, norm, 1.0)
        return (g / s - x.data * proj / (s * s * safe) * (norm > 0),)

    return _result(y, (x,), backward, "normalize")


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator], train: bool) -> Tensor:
    """Inverted dropout; identity unless ``train`` and ``rate > 0``."""
    if not train or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(keep))


def zero_grads(params: Iterable[Tensor]):
    for p in params:
        p.grad = None
