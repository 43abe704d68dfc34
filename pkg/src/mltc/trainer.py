"""Training loop, evaluation and the four-variant ablation runner."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from mltc.errors import InvalidBatchSpec, MLTCError, NonFiniteLoss, NoPositivePairs
from mltc.metrics import METRICS_HEADER, Metrics, argmax_lowest, compute_metrics
from mltc.model import ModelConfig, TransformerClassifier
from mltc.objectives import LOSS_LOG_HEADER, LossReport, contrastive_loss, cross_entropy, total_loss
from mltc.optim import AdamState, adam_step
from mltc.tensor import Tensor
from mltc.text import LabeledDataset, collate, make_batches

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    batch_size: int = 32
    max_steps: int = 1000
    eval_every: int = 100
    seed: int = 0
    lam: float = 0.5
    tau: float = 0.5
    clip_norm: Optional[float] = 1.0
    class_balanced: bool = True
    eval_batch_size: int = 64

    def __post_init__(self):
        if self.learning_rate <= 0 or self.eps_opt <= 0 or self.tau <= 0 or self.lam < 0:
            raise ValueError("learning_rate, eps_opt and tau must be > 0; lam >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 1 <= self.eval_every <= self.max_steps:
            raise ValueError("eval_every must lie in [1, max_steps]")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0 or None")


@dataclass(frozen=True)
class Variant:
    multi_level: bool = True
    contrastive: bool = True
    lightweight: bool = True


ABLATION_VARIANTS = (
    ("Basic Model", Variant(False, False, False)),
    ("+Multi-level attention mechanism", Variant(True, False, False)),
    ("+Contrasting learning strategies", Variant(True, True, False)),
    ("Ours", Variant(True, True, True)),
)


@dataclass
class TrainReport:
    loss_log: list = field(default_factory=list)
    evals: list = field(default_factory=list)  # (step, Metrics)
    best_step: int = 0
    best_metrics: Optional[Metrics] = None
    final_model: Optional[TransformerClassifier] = None

    def loss_log_tsv(self) -> str:
        lines = [LOSS_LOG_HEADER] + [r.tsv(i + 1) for i, r in enumerate(self.loss_log)]
        return "\n".join(lines) + "\n"


def evaluate(model: TransformerClassifier, ds: LabeledDataset, batch_size: int = 64) -> Metrics:
    """Argmax predictions (ties to the lower class) over ``ds`` in its stored order."""
    preds = []
    for start in range(0, len(ds), batch_size):
        batch = collate(ds.examples[start:start + batch_size])
        preds.append(argmax_lowest(model.logits(batch.tokens, batch.pad_mask)))
    y_pred = np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
    return compute_metrics(ds.labels, y_pred, model.config.num_classes)


def _batch_stream(ds: LabeledDataset, cfg: TrainConfig):
    epoch = 0
    while True:
        emitted = False
        for batch in make_batches(ds, cfg.batch_size, seed=[cfg.seed, 3, epoch],
                                  class_balanced=cfg.class_balanced):
            emitted = True
            yield batch
        if not emitted:
            raise InvalidBatchSpec("training set too small for one batch")
        epoch += 1


def loss_terms(model: TransformerClassifier, batch, lam: float, tau: float,
               train: bool = True, dropout_rng=None, positive_rng=None) -> tuple:
    """Forward one batch; returns (total loss tensor, LossReport)."""
    logits, z = model.forward(batch.tokens, batch.pad_mask, train=train, rng=dropout_rng)
    ce = cross_entropy(logits, batch.labels)
    try:
        cl, used = contrastive_loss(z, batch.labels, tau, rng=positive_rng, return_count=True)
    except NoPositivePairs:
        cl, used = Tensor(0.0), 0
    total = total_loss(ce, cl, lam)
    report = LossReport(ce.item(), cl.item(), total.item(), lam, tau, used)
    return total, report


def train(model_cfg: ModelConfig, train_cfg: TrainConfig, train_ds: LabeledDataset,
          valid_ds: LabeledDataset, flags: Variant = Variant(), callback=None) -> tuple:
    """Train one variant; return (best-validation-macro-F1 model, TrainReport)."""
    if len(train_ds) == 0 or len(valid_ds) == 0:
        raise ValueError("train and validation sets must be non-empty")
    cfg = replace(model_cfg, multi_level=flags.multi_level, lightweight=flags.lightweight)
    lam = train_cfg.lam if flags.contrastive else 0.0
    model = TransformerClassifier(cfg, seed=train_cfg.seed)
    dropout_rng = np.random.default_rng([train_cfg.seed, 1])
    positive_rng = np.random.default_rng([train_cfg.seed, 2])
    state = AdamState()
    report = TrainReport()
    best_params = None
    batches = _batch_stream(train_ds, train_cfg)

    for step in range(1, train_cfg.max_steps + 1):
        batch = next(batches)
        total, lr = loss_terms(model, batch, lam, train_cfg.tau, True, dropout_rng, positive_rng)
        if not np.isfinite(lr.total):
            raise NonFiniteLoss(f"non-finite loss at step {step}", step=step)
        total.backward()
        adam_step(model.params, state, train_cfg.learning_rate, (train_cfg.beta1, train_cfg.beta2),
                  train_cfg.eps_opt, train_cfg.clip_norm)
        report.loss_log.append(lr)
        if callback is not None:
            callback(step, lr)

        if step % train_cfg.eval_every == 0 or step == train_cfg.max_steps:
            m = evaluate(model, valid_ds, train_cfg.eval_batch_size)
            report.evals.append((step, m))
            log.info("step %d ce %.4f cl %.4f valid acc %.4f macro-F1 %.4f",
                     step, lr.ce, lr.cl, m.accuracy, m.macro_f1)
            if report.best_metrics is None or m.macro_f1 > report.best_metrics.macro_f1:
                report.best_metrics, report.best_step = m, step
                best_params = {k: p.data.copy() for k, p in model.params.items()}

    report.final_model = model
    params = {k: Tensor(v, requires_grad=True) for k, v in best_params.items()}
    return TransformerClassifier(cfg, params=params), report


@dataclass
class AblationReport:
    rows: list  # (variant name, Metrics or None)
    errors: dict = field(default_factory=dict)

    def metrics(self, name: str) -> Optional[Metrics]:
        return dict(self.rows)[name]

    def tsv(self) -> str:
        lines = [METRICS_HEADER]
        for name, m in self.rows:
            if m is None:
                lines.append(f"{name}\tnan\tnan\tnan\tnan")
            else:
                lines.append(m.tsv_rows(name)[0])
        return "\n".join(lines) + "\n"


def run_ablation(model_cfg: ModelConfig, train_cfg: TrainConfig, train_ds: LabeledDataset,
                 valid_ds: LabeledDataset, eval_ds: Optional[LabeledDataset] = None) -> AblationReport:
    """Train the four cumulative variants with one seed and split.

    Each row holds the metrics of that variant's best checkpoint on
    ``eval_ds`` (the validation set when not given). A variant that raises
    is recorded with ``None`` metrics and its error message.
    """
    eval_ds = valid_ds if eval_ds is None else eval_ds
    rows, errors = [], {}
    for name, flags in ABLATION_VARIANTS:
        try:
            model, _ = train(model_cfg, train_cfg, train_ds, valid_ds, flags)
            rows.append((name, evaluate(model, eval_ds, train_cfg.eval_batch_size)))
        except (MLTCError, ValueError, ArithmeticError) as exc:
            log.error("variant %s failed: %s", name, exc)
            rows.append((name, None))
            errors[name] = str(exc)
    return AblationReport(rows, errors)
