"""Synthetic labelled corpora with known, learnable structure."""
from __future__ import annotations

import numpy as np

from mltc.text import build_vocab, dataset_from_pairs


def make_corpus(n: int, seed: int = 0, num_classes: int = 2, n_filler: int = 40,
                min_len: int = 8, max_len: int = 20, n_cue_tokens: int = 3,
                cues_per_text: int = 2) -> list:
    """``(text, label)`` pairs whose label is carried by class cue words and a class bigram.

    Filler words ``w0..`` are shared by all classes. Each text of class c
    contains ``cues_per_text`` words drawn from class c's cue set
    (``c{c}_{k}``) plus one adjacent bigram ``a{c} b{c}``. The bigram
    tokens ``a*``/``b*`` also appear scattered (non-adjacent) in other
    classes, so only their local adjacency is class-specific.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % num_classes
    rng.shuffle(labels)
    out = []
    for y in labels:
        length = int(rng.integers(min_len, max_len + 1))
        words = [f"w{rng.integers(n_filler)}" for _ in range(length)]
        for _ in range(cues_per_text):
            words.insert(int(rng.integers(len(words) + 1)), f"c{y}_{rng.integers(n_cue_tokens)}")
        pos = int(rng.integers(len(words) + 1))
        words[pos:pos] = [f"a{y}", f"b{y}"]
        other = int((y + 1 + rng.integers(num_classes - 1)) % num_classes)
        # decoy: the other class's bigram tokens, kept apart by filler
        i = int(rng.integers(len(words) + 1))
        words[i:i] = [f"b{other}", f"w{rng.integers(n_filler)}", f"a{other}"]
        out.append((" ".join(words), int(y)))
    return out


def make_separable(n: int = 32, seed: int = 0, num_classes: int = 2) -> list:
    """Short texts fully determined by one class word, for memorisation checks."""
    return make_corpus(n, seed=seed, num_classes=num_classes, n_filler=20, min_len=4,
                       max_len=10, n_cue_tokens=1, cues_per_text=1)


def split_task(pairs: list, max_len: int, fractions=(0.8, 0.1, 0.1), num_classes: int = 2) -> tuple:
    """Cut ``pairs`` in order into consecutive datasets sharing a vocabulary built on the first part.

    Returns ``(vocab, datasets...)``; the pairs are assumed already shuffled.
    """
    bounds = np.cumsum([0] + [int(round(f * len(pairs))) for f in fractions])
    bounds[-1] = len(pairs)
    parts = [pairs[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    vocab = build_vocab([t for t, _ in parts[0]], max_size=20000, min_freq=1)
    return (vocab, *[dataset_from_pairs(p, vocab, max_len, num_classes) for p in parts])
