"""Flat ``key = value`` run configuration."""
from __future__ import annotations

import typing
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from mltc.errors import BadValue, IoError, UnknownKey
from mltc.model import ModelConfig
from mltc.trainer import TrainConfig, Variant


@dataclass
class RunConfig:
    # model
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    n_global: int = 2
    window: int = 4
    d_reduced: Optional[int] = None  # none -> d_model // 2
    d_proj: Optional[int] = None     # none -> d_model // 2
    max_len: int = 256
    dropout_rate: float = 0.1
    multi_level: bool = True
    lightweight: bool = True
    contrastive: bool = True
    # vocabulary
    vocab_max_size: int = 20000
    vocab_min_freq: int = 2
    # optimisation
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    batch_size: int = 32
    max_steps: int = 1000
    eval_every: int = 100
    seed: int = 0
    lambda_: float = 0.5
    tau: float = 0.5
    clip_norm: Optional[float] = 1.0
    class_balanced: bool = True
    eval_batch_size: int = 64
    # data
    data: Optional[str] = None
    format: str = "tsv"
    test_data: Optional[str] = None
    valid_fraction: float = 0.1
    num_classes: Optional[int] = None
    out: Optional[str] = None

    def model_config(self, vocab_size: int, num_classes: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, d_model=self.d_model, n_layers=self.n_layers,
                           n_heads=self.n_heads, n_global=self.n_global, window=self.window,
                           d_reduced=self.d_reduced, d_proj=self.d_proj, num_classes=num_classes,
                           max_len=self.max_len, dropout_rate=self.dropout_rate,
                           multi_level=self.multi_level, lightweight=self.lightweight)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2,
                           eps_opt=self.eps_opt, batch_size=self.batch_size, max_steps=self.max_steps,
                           eval_every=self.eval_every, seed=self.seed, lam=self.lambda_, tau=self.tau,
                           clip_norm=self.clip_norm, class_balanced=self.class_balanced,
                           eval_batch_size=self.eval_batch_size)

    def variant(self) -> Variant:
        return Variant(self.multi_level, self.contrastive, self.lightweight)

    def validate(self, require=("data",)):
        """Check referenced paths and value ranges."""
        for key in require:
            value = getattr(self, key)
            if value is None or not Path(value).exists():
                raise IoError(f"{key}: path {value!r} does not exist")
        if self.test_data is not None and not Path(self.test_data).exists():
            raise IoError(f"test_data: path {self.test_data!r} does not exist")
        if self.format not in ("tsv", "imdb_dir"):
            raise BadValue("format", self.format)
        if not 0.0 < self.valid_fraction < 1.0:
            raise BadValue("valid_fraction", str(self.valid_fraction))
        # builds both configs so their own invariants are enforced
        self.model_config(vocab_size=3, num_classes=self.num_classes or 2)
        self.train_config()
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{key_name(f.name)} = {'none' if v is None else (repr(v) if isinstance(v, float) else v)}")
        return "\n".join(lines) + "\n"


def key_name(field_name: str) -> str:
    return field_name.rstrip("_")


KEYS = {key_name(f.name): f.name for f in fields(RunConfig)}
_HINTS = typing.get_type_hints(RunConfig)


def convert(key: str, raw: str):
    if key not in KEYS:
        raise UnknownKey(key)
    tp = _HINTS[KEYS[key]]
    raw = raw.strip()
    if typing.get_origin(tp) is typing.Union:
        if raw.lower() == "none":
            return None
        tp = next(t for t in typing.get_args(tp) if t is not type(None))
    if tp is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise BadValue(key, raw)
    try:
        return tp(raw)
    except ValueError:
        raise BadValue(key, raw) from None


def parse_config_text(text: str, overrides: Optional[dict] = None) -> RunConfig:
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise BadValue(f"line {n}", line)
        key = key.strip()
        values[KEYS.get(key, key)] = convert(key, raw)
    for key, raw in (overrides or {}).items():
        values[KEYS.get(key, key)] = convert(key, raw) if isinstance(raw, str) else raw
    return RunConfig(**values)


def parse_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Read ``path`` (``key = value`` lines, ``#`` comments, later keys win) and apply overrides."""
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(str(exc)) from None
    return parse_config_text(text, overrides)
