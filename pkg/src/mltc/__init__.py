"""Transformer text classifier with multi-level (global + local) attention,
a bottleneck feed-forward block and a joint cross-entropy / contrastive
objective, built on a small numpy autodiff core."""

from mltc.model import ModelConfig, TransformerClassifier
from mltc.tensor import Tensor
from mltc.trainer import TrainConfig, Variant, evaluate, run_ablation, train

__all__ = ["ModelConfig", "Tensor", "TrainConfig", "TransformerClassifier", "Variant",
           "evaluate", "run_ablation", "train"]
