"""Manual IMDB smoke run: train on a balanced review subset, report test accuracy.

    python3 scripts/imdb_smoke.py --imdb /path/to/aclImdb

Expects ``train/{neg,pos}`` and ``test/{neg,pos}`` under ``--imdb``. The
last stdout line is ``test_accuracy<TAB>value``.
"""
import argparse
import logging
import time

import numpy as np

from mltc.model import ModelConfig
from mltc.text import build_vocab, dataset_from_pairs, read_corpus
from mltc.trainer import TrainConfig, Variant, evaluate, train


def balanced_subset(pairs, n, rng):
    by_label = {}
    for i, (_, y) in enumerate(pairs):
        by_label.setdefault(y, []).append(i)
    per = n // len(by_label)
    picked = np.concatenate([rng.choice(ix, size=min(per, len(ix)), replace=False) for ix in by_label.values()])
    rng.shuffle(picked)
    return [pairs[i] for i in picked]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--imdb", required=True)
    ap.add_argument("--n_train", type=int, default=5000)
    ap.add_argument("--n_valid", type=int, default=500)
    ap.add_argument("--n_test", type=int, default=2000)
    ap.add_argument("--max_len", type=int, default=160)
    ap.add_argument("--d_model", type=int, default=32)
    ap.add_argument("--max_steps", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    rng = np.random.default_rng(args.seed)
    pool = balanced_subset(read_corpus(f"{args.imdb}/train", "imdb_dir"), args.n_train + args.n_valid, rng)
    train_pairs, valid_pairs = pool[:args.n_train], pool[args.n_train:]
    test_pairs = balanced_subset(read_corpus(f"{args.imdb}/test", "imdb_dir"), args.n_test, rng)

    vocab = build_vocab([t for t, _ in train_pairs], max_size=20000, min_freq=2)
    tr, va, te = (dataset_from_pairs(p, vocab, args.max_len, 2) for p in (train_pairs, valid_pairs, test_pairs))
    cfg = ModelConfig(vocab_size=len(vocab), d_model=args.d_model, n_layers=2, n_heads=4, n_global=2,
                      window=4, max_len=args.max_len, num_classes=2, dropout_rate=0.1)
    tc = TrainConfig(learning_rate=1e-3, batch_size=32, max_steps=args.max_steps,
                     eval_every=min(250, args.max_steps), seed=args.seed)

    start = time.perf_counter()
    model, report = train(cfg, tc, tr, va, Variant())
    m = evaluate(model, te)
    print(f"train_minutes\t{(time.perf_counter() - start) / 60:.1f}")
    print(f"best_step\t{report.best_step}")
    print(f"test_macro_f1\t{m.macro_f1!r}")
    print(f"test_accuracy\t{m.accuracy!r}")


if __name__ == "__main__":
    main()
