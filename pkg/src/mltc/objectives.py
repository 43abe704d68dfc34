"""Cross-entropy, supervised contrastive loss and their weighted sum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mltc.errors import NoPositivePairs
from mltc.tensor import Tensor, add, log_softmax_rows, matmul, mul, normalize_rows, scale, sum_, swap_last


@dataclass
class LossReport:
    ce: float
    cl: float
    total: float
    lam: float
    tau: float
    anchors_used: int

    def tsv(self, step: int) -> str:
        return f"{step}\t{self.ce!r}\t{self.cl!r}\t{self.total!r}\t{self.anchors_used}"


LOSS_LOG_HEADER = "step\tce\tcl\ttotal\tanchors_used"


def _one_hot(labels, n: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n))
    out[np.arange(labels.size), labels] = 1.0
    return out


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Batch mean of -log softmax(logits)[label]."""
    B, C = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (B,) or labels.min() < 0 or labels.max() >= C:
        raise ValueError(f"labels must be {B} ints in [0, {C})")
    picked = sum_(mul(log_softmax_rows(logits), Tensor(_one_hot(labels, C))))
    return scale(picked, -1.0 / B)


def cosine_sim(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b) + 1e-12))


def choose_positives(labels, rng) -> np.ndarray:
    """For each anchor, a uniformly drawn same-label index != itself, or -1."""
    labels = np.asarray(labels)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    out = np.full(labels.size, -1, dtype=np.int64)
    for i, y in enumerate(labels):
        cands = np.flatnonzero(labels == y)
        cands = cands[cands != i]
        if cands.size:
            out[i] = cands[rng.integers(cands.size)]
    return out


def contrastive_loss(Z: Tensor, labels, tau: float = 0.5, rng=None, positives=None,
                     return_count: bool = False):
    """Supervised InfoNCE with one sampled same-label positive per anchor.

    The denominator runs over every k != i. Anchors without a same-label
    partner in the batch are skipped; ``return_count`` also returns how
    many anchors contributed.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    B = Z.shape[0]
    if B < 2:
        raise ValueError("contrastive loss needs a batch of at least 2")
    if positives is None:
        positives = choose_positives(labels, rng)
    positives = np.asarray(positives, dtype=np.int64)
    usable = positives >= 0
    n_used = int(usable.sum())
    if n_used == 0:
        raise NoPositivePairs("no anchor has an in-batch positive")

    Zn = normalize_rows(Z, eps=1e-12)
    sims = scale(matmul(Zn, swap_last(Zn)), 1.0 / tau)
    not_self = ~np.eye(B, dtype=bool)
    logp = log_softmax_rows(sims, not_self)
    pick = np.zeros((B, B))
    rows = np.flatnonzero(usable)
    pick[rows, positives[rows]] = 1.0
    loss = scale(sum_(mul(logp, Tensor(pick))), -1.0 / n_used)
    return (loss, n_used) if return_count else loss


def total_loss(ce: Tensor, cl: Tensor, lam: float) -> Tensor:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return add(ce, scale(cl, lam))
