"""Binary checkpoint format.

Layout (little-endian)::

    b"MLTC"  u32 version
    u32 n    config as UTF-8 ``key=value`` lines (n bytes)
    u32 count
    count x { u32 n, name (n bytes UTF-8), u32 rank, u64 dims[rank], f64 payload }
"""
from __future__ import annotations

import struct
import typing
from dataclasses import fields

import numpy as np

from mltc.errors import CorruptCheckpoint
from mltc.model import ModelConfig, TransformerClassifier
from mltc.tensor import Tensor

MAGIC = b"MLTC"
VERSION = 1


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(raw: str, tp):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        if raw == "none":
            return None
        tp = next(t for t in typing.get_args(tp) if t is not type(None))
    if tp is bool:
        if raw not in ("True", "False"):
            raise ValueError(raw)
        return raw == "True"
    return tp(raw)


def config_to_text(cfg: ModelConfig) -> str:
    return "".join(f"{k}={_format_value(v)}\n" for k, v in cfg.to_dict().items())


def config_from_text(text: str) -> ModelConfig:
    hints = typing.get_type_hints(ModelConfig)
    known = {f.name for f in fields(ModelConfig)}
    values = {}
    for line in text.splitlines():
        key, sep, raw = line.partition("=")
        if not sep or key not in known:
            raise CorruptCheckpoint("config", f"unexpected line {line!r}")
        try:
            values[key] = _parse_value(raw, hints[key])
        except (ValueError, TypeError):
            raise CorruptCheckpoint("config", f"bad value for {key}: {raw!r}") from None
    try:
        return ModelConfig(**values)
    except (TypeError, ValueError) as exc:
        raise CorruptCheckpoint("config", str(exc)) from None


def save_checkpoint(params: dict, config: ModelConfig, path):
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    cfg = config_to_text(config).encode("utf-8")
    chunks += [struct.pack("<I", len(cfg)), cfg, struct.pack("<I", len(params))]
    for name, t in params.items():
        data = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
        raw = name.encode("utf-8")
        chunks += [struct.pack("<I", len(raw)), raw, struct.pack("<I", data.ndim),
                   struct.pack(f"<{data.ndim}Q", *data.shape),
                   np.ascontiguousarray(data, dtype="<f8").tobytes()]
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int, field: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptCheckpoint(field, "truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, field: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), field))


def load_checkpoint(path) -> tuple:
    """Return ``(params, config)``; params are fresh requires_grad tensors."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(4, "magic") != MAGIC:
        raise CorruptCheckpoint("magic")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise CorruptCheckpoint("version", f"unsupported version {version}")
    (n,) = r.unpack("<I", "config length")
    try:
        text = r.take(n, "config").decode("utf-8")
    except UnicodeDecodeError:
        raise CorruptCheckpoint("config", "not UTF-8") from None
    config = config_from_text(text)
    (count,) = r.unpack("<I", "tensor count")
    params = {}
    for k in range(count):
        (n,) = r.unpack("<I", f"tensor {k} name length")
        name = r.take(n, f"tensor {k} name").decode("utf-8", errors="replace")
        (rank,) = r.unpack("<I", f"{name} rank")
        dims = r.unpack(f"<{rank}Q", f"{name} dims")
        size = int(np.prod(dims)) if rank else 1
        payload = r.take(8 * size, f"{name} payload")
        data = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
        params[name] = Tensor(data, requires_grad=True)
    if r.pos != len(r.buf):
        raise CorruptCheckpoint("trailer", f"{len(r.buf) - r.pos} unexpected bytes")
    expected = TransformerClassifier(config, seed=0).params
    for name, t in expected.items():
        if name not in params:
            raise CorruptCheckpoint(name, "missing tensor")
        if params[name].shape != t.shape:
            raise CorruptCheckpoint(name, f"shape {params[name].shape} != {t.shape}")
    return params, config
