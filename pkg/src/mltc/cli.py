"""Command-line entry point: ``mltc {train,eval,ablate,gradcheck}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from mltc.checkpoint import load_checkpoint, save_checkpoint
from mltc.config import RunConfig, key_name, parse_config
from mltc.errors import (BadValue, CorruptCheckpoint, EmptyCorpus, InvalidBatchSpec, IoError,
                         NoPositivePairs, NonFiniteGradient, NonFiniteLoss, ParseError, UnknownKey)
from mltc.metrics import METRICS_HEADER
from mltc.model import TransformerClassifier
from mltc.text import Vocabulary, build_vocab, dataset_from_pairs, load_dataset, read_corpus, split_dataset, write_tsv
from mltc.trainer import evaluate, run_ablation, train
from mltc.verify import REFERENCE_TOLERANCE, check_reference_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DATA_ERRORS = (IoError, ParseError, EmptyCorpus, InvalidBatchSpec, CorruptCheckpoint,
               NoPositivePairs, FileNotFoundError)
NUMERIC_ERRORS = (NonFiniteLoss, NonFiniteGradient, FloatingPointError)

log = logging.getLogger("mltc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mltc", description="Multi-level attention transformer text classifier.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add_overrides(p):
        group = p.add_argument_group("config overrides")
        for f in fields(RunConfig):
            key = key_name(f.name)
            if key in ("data", "out"):
                continue
            group.add_argument(f"--{key}", dest=f"set_{key}", metavar="VALUE", default=None)

    for name in ("train", "ablate"):
        p = sub.add_parser(name, help=f"{name} on a labelled corpus")
        p.add_argument("--config", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        add_overrides(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="tsv", choices=("tsv", "imdb_dir"))
    p.add_argument("--vocab", default=None, help="vocabulary file (default: vocab.tsv beside the checkpoint)")
    p.add_argument("--batch_size", type=int, default=64)
    p.add_argument("--out", default=None, help="directory for effective-config")

    p = sub.add_parser("gradcheck", help="finite-difference check of the tiny reference model")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--tolerance", type=float, default=REFERENCE_TOLERANCE)
    p.add_argument("--out", default=None, help="directory for effective-config")
    return parser


def _run_config(args) -> RunConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("set_") and v is not None}
    overrides["data"] = args.data
    overrides["out"] = args.out
    cfg = parse_config(args.config, overrides)
    try:
        return cfg.validate()
    except (UnknownKey, BadValue, IoError):
        raise
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def _write_effective(out, cfg_text: str):
    if out is None:
        return
    Path(out).mkdir(parents=True, exist_ok=True)
    (Path(out) / "effective-config").write_text(cfg_text, encoding="utf-8")


def _prepare(cfg: RunConfig):
    pairs = read_corpus(cfg.data, cfg.format)
    if not pairs:
        raise EmptyCorpus(f"no examples in {cfg.data}")
    num_classes = cfg.num_classes or max(2, max(y for _, y in pairs) + 1)
    vocab_probe = Vocabulary()
    full = dataset_from_pairs(pairs, vocab_probe, cfg.max_len, num_classes)
    train_idx, valid_idx = split_dataset(full, cfg.valid_fraction, seed=cfg.seed)
    vocab = build_vocab(train_idx.texts, cfg.vocab_max_size, cfg.vocab_min_freq)
    train_ds = dataset_from_pairs(list(zip(train_idx.texts, train_idx.labels.tolist())), vocab, cfg.max_len, num_classes)
    valid_ds = dataset_from_pairs(list(zip(valid_idx.texts, valid_idx.labels.tolist())), vocab, cfg.max_len, num_classes)
    test_ds = None
    if cfg.test_data:
        test_ds = load_dataset(cfg.test_data, cfg.format, vocab, cfg.max_len, num_classes)
    return vocab, train_ds, valid_ds, test_ds


def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = Path(cfg.out)
    _write_effective(out, cfg.to_text())
    vocab, train_ds, valid_ds, test_ds = _prepare(cfg)
    model_cfg = cfg.model_config(len(vocab), train_ds.num_classes)
    model, report = train(model_cfg, cfg.train_config(), train_ds, valid_ds, cfg.variant())
    save_checkpoint(model.params, model.config, out / "checkpoint.mltc")
    vocab.save(out / "vocab.tsv")
    write_tsv(valid_ds, out / "valid.tsv")
    (out / "loss_log.tsv").write_text(report.loss_log_tsv(), encoding="utf-8")
    rows = [METRICS_HEADER] + report.best_metrics.tsv_rows("valid")
    if test_ds is not None:
        rows += evaluate(model, test_ds, cfg.eval_batch_size).tsv_rows("test")
    text = "\n".join(rows) + "\n"
    (out / "metrics.tsv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    out = Path(cfg.out)
    _write_effective(out, cfg.to_text())
    vocab, train_ds, valid_ds, test_ds = _prepare(cfg)
    model_cfg = cfg.model_config(len(vocab), train_ds.num_classes)
    report = run_ablation(model_cfg, cfg.train_config(), train_ds, valid_ds, test_ds)
    text = report.tsv()
    (out / "ablation.tsv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    for name, err in report.errors.items():
        log.error("%s failed: %s", name, err)
    return EXIT_NUMERIC if report.errors else EXIT_OK


def cmd_eval(args) -> int:
    params, config = load_checkpoint(args.ckpt)
    vocab_path = args.vocab or Path(args.ckpt).with_name("vocab.tsv")
    vocab = Vocabulary.load(vocab_path)
    _write_effective(args.out, f"ckpt = {args.ckpt}\ndata = {args.data}\nformat = {args.format}\n"
                               f"vocab = {vocab_path}\nbatch_size = {args.batch_size}\n")
    ds = load_dataset(args.data, args.format, vocab, config.max_len, config.num_classes)
    metrics = evaluate(TransformerClassifier(config, params), ds, args.batch_size)
    sys.stdout.write("\n".join([METRICS_HEADER] + metrics.tsv_rows("eval")) + "\n")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    _write_effective(args.out, f"seed = {args.seed}\neps = {args.eps!r}\ntolerance = {args.tolerance!r}\n")
    err = check_reference_model(seed=args.seed, eps=args.eps)
    passed = err <= args.tolerance
    print(f"max_relative_error\t{err!r}\t{'pass' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_NUMERIC


COMMANDS = {"train": cmd_train, "ablate": cmd_ablate, "eval": cmd_eval, "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mltc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnknownKey, BadValue) as exc:
        print(f"mltc: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"mltc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NUMERIC_ERRORS as exc:
        print(f"mltc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
