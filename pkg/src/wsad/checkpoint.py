"""Binary checkpoints: model parameters, Adam state and a JSON trailer.

Layout, little-endian::

    "WSCK" | u32 version=1 | u32 D | u32 H | f64 dropout_rate
    | f64 W1[H*D] | f64 b1[H] | f64 W2[H] | f64 b2
    | u64 t | f64 lr | f64 beta1 | f64 beta2 | f64 eps
    | f64 m_W1 m_b1 m_W2 m_b2 | f64 v_W1 v_b1 v_W2 v_b2
    | u32 n | n bytes of UTF-8 JSON (training config echo and resume state)
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagicError, FormatError, TruncatedError, VersionError
from .mlp import AdamState, ModelParams

MAGIC = b"WSCK"
VERSION = 1
_HEAD = struct.Struct("<4sIIId")
_ADAM = struct.Struct("<Qdddd")
_LEN = struct.Struct("<I")


@dataclass
class Checkpoint:
    params: ModelParams
    adam: AdamState
    extra: dict = field(default_factory=dict)


def _shapes(D: int, H: int) -> list[tuple[int, ...]]:
    return [(H, D), (H,), (H,), (1,)]


def encode(ckpt: Checkpoint) -> bytes:
    p, s = ckpt.params, ckpt.adam
    parts = [_HEAD.pack(MAGIC, VERSION, p.input_dim, p.hidden_dim, p.dropout_rate)]
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in p.arrays()]
    parts.append(_ADAM.pack(s.t, s.lr, s.beta1, s.beta2, s.eps))
    parts += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in s.m + s.v]
    trailer = json.dumps(ckpt.extra, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts += [_LEN.pack(len(trailer)), trailer]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"checkpoint truncated at byte {self.pos} (needed {n} more)")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def array(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)


def decode(data: bytes) -> Checkpoint:
    if data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r} (not a checkpoint)")
    r = _Reader(data)
    _, version, D, H, dropout = r.unpack(_HEAD)
    if version != VERSION:
        raise VersionError(f"unsupported checkpoint version {version}")
    shapes = _shapes(D, H)
    W1, b1, W2, b2 = (r.array(sh) for sh in shapes)
    t, lr, beta1, beta2, eps = r.unpack(_ADAM)
    m = tuple(r.array(sh) for sh in shapes)
    v = tuple(r.array(sh) for sh in shapes)
    (n,) = r.unpack(_LEN)
    extra = json.loads(r.take(n).decode("utf-8"))
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes in checkpoint")
    params = ModelParams(W1, b1, W2, float(b2[0]), dropout)
    return Checkpoint(params, AdamState(m, v, t, lr, beta1, beta2, eps), extra)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(encode(ckpt))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def load_checkpoint(path) -> Checkpoint:
    return decode(Path(path).read_bytes())
