import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mltc import trainer as trainer_mod
from mltc.errors import NonFiniteGradient, NonFiniteLoss
from mltc.metrics import argmax_lowest, compute_metrics, confusion_matrix
from mltc.model import ModelConfig, TransformerClassifier
from mltc.optim import AdamState, adam_step, clip_by_global_norm
from mltc.synthetic import make_corpus, split_task
from mltc.tensor import Tensor
from mltc.trainer import ABLATION_VARIANTS, TrainConfig, Variant, evaluate, run_ablation, train


def brute_metrics(y_true, y_pred, C):
    """Per-class counts by explicit loops, zero where a denominator is zero."""
    prec, rec, f1 = [], [], []
    for c in range(C):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        p_ = tp / (tp + fp) if tp + fp else 0.0
        r_ = tp / (tp + fn) if tp + fn else 0.0
        prec.append(p_)
        rec.append(r_)
        f1.append(2 * p_ * r_ / (p_ + r_) if p_ + r_ else 0.0)
    acc = sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true)
    return acc, prec, rec, f1


# -- optimizer ------------------------------------------------------------

def test_adam_zero_gradient_is_noop():
    p = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True)}
    p["w"].grad = np.zeros(2)
    adam_step(p, AdamState(), lr=0.1)
    assert p["w"].data.tolist() == [1.0, -2.0]


def test_adam_first_step_moves_by_lr():
    # bias-corrected m/sqrt(v) is sign(g) on step one
    p = {"w": Tensor(np.array([0.0, 0.0, 0.0]), requires_grad=True)}
    p["w"].grad = np.array([0.3, -0.02, 4.0])
    adam_step(p, AdamState(), lr=1e-3, clip_norm=None)
    np.testing.assert_allclose(p["w"].data, [-1e-3, 1e-3, -1e-3], rtol=1e-6)
    assert p["w"].grad is None


def test_adam_two_steps_match_hand_recurrence():
    g1, g2, lr, b1, b2, eps = 0.5, -0.25, 0.01, 0.9, 0.999, 1e-8
    p = {"w": Tensor(np.array([1.0]), requires_grad=True)}
    st_ = AdamState()
    w = 1.0
    m = v = 0.0
    for t, g in enumerate((g1, g2), start=1):
        p["w"].grad = np.array([g])
        adam_step(p, st_, lr, (b1, b2), eps, clip_norm=None)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    assert abs(p["w"].data[0] - w) <= 1e-15


def test_clip_by_global_norm():
    grads = {"a": np.array([6.0, 0.0]), "b": np.array([[0.0, 8.0]])}
    assert clip_by_global_norm(grads, 1.0) == 10.0
    np.testing.assert_allclose(grads["a"], [0.6, 0.0])
    np.testing.assert_allclose(grads["b"], [[0.0, 0.8]])
    small = {"a": np.array([0.1])}
    clip_by_global_norm(small, 1.0)
    assert small["a"][0] == 0.1


def test_adam_rejects_non_finite_gradient():
    p = {"ok": Tensor(np.zeros(1), requires_grad=True), "bad": Tensor(np.zeros(2), requires_grad=True)}
    p["ok"].grad = np.ones(1)
    p["bad"].grad = np.array([1.0, np.inf])
    with pytest.raises(NonFiniteGradient) as exc:
        adam_step(p, AdamState())
    assert exc.value.name == "bad"


# -- metrics --------------------------------------------------------------

def test_binary_metrics_hand_case():
    # class 1: TP 2, FP 1, FN 1, TN 2
    m = compute_metrics([1, 1, 1, 0, 0, 0], [1, 1, 0, 1, 0, 0], 2)
    assert m.confusion.tolist() == [[2, 1], [1, 2]]
    assert m.precision[1] == 2 / 3 and m.recall[1] == 2 / 3
    assert abs(m.f1[1] - 2 / 3) <= 1e-15
    assert m.accuracy == 4 / 6


def test_perfect_predictions():
    y = [0, 1, 2, 2, 1]
    m = compute_metrics(y, y, 3)
    assert m.accuracy == m.macro_f1 == m.macro_recall == m.macro_precision == 1.0


def test_absent_class_scores_zero():
    m = compute_metrics([0, 0], [0, 0], 2)
    assert m.precision[1] == m.recall[1] == m.f1[1] == 0.0
    assert m.macro_f1 == 0.5


@settings(max_examples=60)
@given(st.integers(0, 10_000), st.integers(2, 5))
def test_metrics_match_brute_force(seed, C):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 60))
    y, p = rng.integers(0, C, size=n), rng.integers(0, C, size=n)
    m = compute_metrics(y, p, C)
    acc, prec, rec, f1 = brute_metrics(y.tolist(), p.tolist(), C)
    assert m.accuracy == acc and m.precision.tolist() == prec
    assert m.recall.tolist() == rec and m.f1.tolist() == f1
    assert confusion_matrix(y, p, C).sum() == n


def test_argmax_ties_go_to_lower_index():
    assert argmax_lowest(np.array([[1.0, 1.0], [0.0, 2.0], [3.0, 3.0]])).tolist() == [0, 1, 0]


# -- training loop --------------------------------------------------------

@pytest.fixture(scope="module")
def task():
    vocab, tr, va = split_task(make_corpus(96, seed=1, min_len=4, max_len=10), 16, (0.75, 0.25))
    cfg = ModelConfig(vocab_size=len(vocab), d_model=8, n_layers=1, n_heads=2, n_global=1,
                      window=2, max_len=16, dropout_rate=0.1)
    return cfg, tr, va


def quick(**kw):
    base = dict(learning_rate=1e-3, batch_size=8, max_steps=10, eval_every=5, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(max_steps=5, eval_every=10)
    with pytest.raises(ValueError):
        TrainConfig(tau=0)


def test_single_step_logs_once(task):
    cfg, tr, va = task
    _, report = train(cfg, quick(max_steps=1, eval_every=1), tr, va)
    assert len(report.loss_log) == 1
    lines = report.loss_log_tsv().splitlines()
    assert lines[0] == "step\tce\tcl\ttotal\tanchors_used" and lines[1].startswith("1\t")
    assert report.best_step == 1


def test_same_seed_same_log(task):
    cfg, tr, va = task
    a = train(cfg, quick(), tr, va)[1].loss_log_tsv()
    b = train(cfg, quick(), tr, va)[1].loss_log_tsv()
    assert a == b
    c = train(cfg, quick(seed=4), tr, va)[1].loss_log_tsv()
    assert a != c


def test_disabling_contrastive_equals_zero_lambda(task):
    cfg, tr, va = task
    off = train(cfg, quick(), tr, va, Variant(contrastive=False))[1]
    zero = train(cfg, quick(lam=0.0), tr, va, Variant(contrastive=True))[1]
    assert [r.total for r in off.loss_log] == [r.total for r in zero.loss_log]
    assert all(r.total == r.ce for r in off.loss_log)


def test_total_is_ce_plus_weighted_cl(task):
    cfg, tr, va = task
    report = train(cfg, quick(lam=0.7), tr, va)[1]
    for r in report.loss_log:
        assert r.total == pytest.approx(r.ce + 0.7 * r.cl, abs=1e-12)
        assert r.anchors_used == 8


def test_evaluations_and_best_checkpoint(task):
    cfg, tr, va = task
    model, report = train(cfg, quick(max_steps=12, eval_every=5), tr, va)
    assert [s for s, _ in report.evals] == [5, 10, 12]
    best = max(m.macro_f1 for _, m in report.evals)
    assert report.best_metrics.macro_f1 == best
    assert evaluate(model, va) == report.best_metrics
    assert report.final_model is not None


def test_untrained_model_is_near_chance(task):
    cfg, tr, va = task
    accs = [evaluate(TransformerClassifier(cfg, seed=s), tr).accuracy for s in range(20)]
    assert 0.3 <= np.mean(accs) <= 0.7


def test_non_finite_loss_reports_step(task, monkeypatch):
    cfg, tr, va = task
    real = trainer_mod.cross_entropy
    calls = {"n": 0}

    def flaky(logits, labels):
        calls["n"] += 1
        out = real(logits, labels)
        return out * float("nan") if calls["n"] == 3 else out

    monkeypatch.setattr(trainer_mod, "cross_entropy", flaky)
    with pytest.raises(NonFiniteLoss) as exc:
        train(cfg, quick(), tr, va)
    assert exc.value.step == 3


def test_ablation_rows_and_shared_setup(task):
    cfg, tr, va = task
    tc = quick(max_steps=6, eval_every=3)
    report = run_ablation(cfg, tc, tr, va)
    assert [n for n, _ in report.rows] == [n for n, _ in ABLATION_VARIANTS] == [
        "Basic Model", "+Multi-level attention mechanism", "+Contrasting learning strategies", "Ours"]
    assert not report.errors
    lines = report.tsv().splitlines()
    assert lines[0].startswith("variant\taccuracy") and len(lines) == 5
    model, _ = train(cfg, tc, tr, va, ABLATION_VARIANTS[0][1])
    assert evaluate(model, va) == report.metrics("Basic Model")
