"""Text cleaning, word-level vocabulary, dataset loading and batching."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from mltc.errors import EmptyCorpus, InvalidBatchSpec, IoError, ParseError

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_BREAK_RE = re.compile(r"<br\s*/?>")
_PUNCT_RE = re.compile(r'([.,!?;:"()\[\]{}])')


def clean(text: str) -> str:
    """Lowercase, drop ``<br />`` tags, split off punctuation, collapse whitespace.

    >>> clean("Great movie!<br />A+")
    'great movie ! a+'
    """
    text = text.lower()
    while True:
        stripped = _BREAK_RE.sub(" ", text)
        if stripped == text:
            break
        text = stripped
    text = _PUNCT_RE.sub(r" \1 ", text)
    return " ".join(text.split())


@dataclass
class Vocabulary:
    id_to_token: list = field(default_factory=lambda: [PAD_TOKEN, UNK_TOKEN])

    def __post_init__(self):
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}

    pad_id = PAD_ID
    unk_id = UNK_ID

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id and self.token_to_id[token] >= 2

    def lookup(self, token: str) -> int:
        i = self.token_to_id.get(token, UNK_ID)
        return i if i >= 2 else UNK_ID

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for i, tok in enumerate(self.id_to_token):
                fh.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IoError(str(exc)) from None
        tokens = []
        for n, line in enumerate(lines, start=1):
            tok, sep, idx = line.rpartition("\t")
            if not sep or not idx.isdigit() or int(idx) != n - 1:
                raise ParseError(f"bad vocabulary entry {line!r}", line=n)
            tokens.append(tok)
        if tokens[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ParseError("reserved ids 0/1 must be <pad>/<unk>", line=1)
        return cls(tokens)


def build_vocab(corpus: Sequence[str], max_size: int = 20000, min_freq: int = 2) -> Vocabulary:
    """Rank tokens by (count desc, token asc) and keep the top ``max_size - 2``."""
    if max_size < 3:
        raise ValueError("max_size must be >= 3")
    if not corpus:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    counts = Counter(tok for doc in corpus for tok in doc.split())
    counts.pop(PAD_TOKEN, None)
    counts.pop(UNK_TOKEN, None)
    ranked = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    return Vocabulary([PAD_TOKEN, UNK_TOKEN] + ranked[: max_size - 2])


def encode(text: str, vocab: Vocabulary, max_len: int) -> list:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    return [vocab.lookup(tok) for tok in clean(text).split()[:max_len]]


def decode(ids: Sequence[int], vocab: Vocabulary) -> list:
    return [vocab.id_to_token[i] for i in ids]


@dataclass
class LabeledDataset:
    examples: list  # (token ids, label) pairs
    num_classes: int
    texts: Optional[list] = None

    def __len__(self):
        return len(self.examples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([y for _, y in self.examples], dtype=np.int64)

    def subset(self, indices) -> "LabeledDataset":
        texts = None if self.texts is None else [self.texts[i] for i in indices]
        return LabeledDataset([self.examples[i] for i in indices], self.num_classes, texts)


def read_corpus(path, fmt: str = "tsv") -> list:
    """Raw ``(text, label)`` pairs in deterministic order."""
    path = Path(path)
    if fmt == "imdb_dir":
        out = []
        for label, sub in enumerate(("neg", "pos")):
            d = path / sub
            if not d.is_dir():
                raise IoError(f"missing directory {d}")
            for f in sorted(d.glob("*.txt")):
                out.append((f.read_text(encoding="utf-8"), label))
        return out
    if fmt == "tsv":
        if not path.is_file():
            raise IoError(f"missing file {path}")
        out = []
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                line = line.rstrip("\n").rstrip("\r")
                label, sep, text = line.partition("\t")
                if not sep:
                    raise ParseError("expected label<TAB>text", line=n)
                try:
                    y = int(label)
                except ValueError:
                    raise ParseError(f"non-integer label {label!r}", line=n) from None
                if y < 0:
                    raise ParseError(f"negative label {y}", line=n)
                out.append((text, y))
        return out
    raise ValueError(f"unknown dataset format {fmt!r}")


def dataset_from_pairs(pairs, vocab: Vocabulary, max_len: int,
                       num_classes: Optional[int] = None) -> LabeledDataset:
    if num_classes is None:
        num_classes = max(2, max((y for _, y in pairs), default=0) + 1)
    bad = [y for _, y in pairs if y >= num_classes]
    if bad:
        raise ParseError(f"label {bad[0]} >= num_classes {num_classes}")
    examples = [(encode(t, vocab, max_len), y) for t, y in pairs]
    return LabeledDataset(examples, num_classes, [clean(t) for t, _ in pairs])


def load_dataset(path, fmt: str, vocab: Vocabulary, max_len: int,
                 num_classes: Optional[int] = None) -> LabeledDataset:
    return dataset_from_pairs(read_corpus(path, fmt), vocab, max_len, num_classes)


def write_tsv(ds: LabeledDataset, path):
    """Write the cleaned texts back as ``label<TAB>text`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for text, (_, y) in zip(ds.texts, ds.examples):
            fh.write(f"{y}\t{text}\n")


@dataclass
class Batch:
    tokens: np.ndarray    # int64 [B, L]
    pad_mask: np.ndarray  # bool [B, L], True on real tokens
    labels: np.ndarray    # int64 [B]

    def __len__(self):
        return len(self.labels)


def collate(examples: Sequence) -> Batch:
    # empty sequences still get one (unknown) token so no row is fully padded
    seqs = [list(ids) or [UNK_ID] for ids, _ in examples]
    length = max(len(s) for s in seqs)
    tokens = np.full((len(seqs), length), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(seqs), length), dtype=bool)
    for i, s in enumerate(seqs):
        tokens[i, :len(s)] = s
        mask[i, :len(s)] = True
    return Batch(tokens, mask, np.array([y for _, y in examples], dtype=np.int64))


def make_batches(ds: LabeledDataset, batch_size: int, seed=0,
                 class_balanced: bool = True) -> Iterator[Batch]:
    """One seeded pass over ``ds``.

    Balanced batches carry exactly ``batch_size // num_classes`` examples of
    every class and the trailing partial batch is dropped; unbalanced passes
    keep it.
    """
    if batch_size < 2:
        raise InvalidBatchSpec("batch_size must be >= 2")
    rng = np.random.default_rng(seed)
    labels = ds.labels
    if not class_balanced:
        order = rng.permutation(len(ds))
        for start in range(0, len(order), batch_size):
            yield collate([ds.examples[i] for i in order[start:start + batch_size]])
        return

    c = ds.num_classes
    if batch_size % c:
        raise InvalidBatchSpec(f"batch_size {batch_size} not divisible by {c} classes")
    per = batch_size // c
    pools = [rng.permutation(np.flatnonzero(labels == k)) for k in range(c)]
    short = [k for k, p in enumerate(pools) if len(p) < per]
    if short:
        raise InvalidBatchSpec(f"class {short[0]} has fewer than {per} examples")
    n_batches = min(len(p) for p in pools) // per
    for b in range(n_batches):
        idx = np.concatenate([p[b * per:(b + 1) * per] for p in pools])
        idx = rng.permutation(idx)
        yield collate([ds.examples[i] for i in idx])


def split_dataset(ds: LabeledDataset, valid_fraction: float, seed=0) -> tuple:
    """Seeded train/validation split."""
    order = np.random.default_rng(seed).permutation(len(ds))
    n_valid = int(round(len(ds) * valid_fraction))
    return ds.subset(sorted(order[n_valid:])), ds.subset(sorted(order[:n_valid]))
