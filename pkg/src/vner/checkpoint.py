"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    magic    8 bytes   b"VNERCKPT"
    version  u32
    count    u32       number of sections
    section  name_len u16, name utf-8, payload_len u64, payload
    ...

Sections ``config``, ``vocabs`` and ``meta`` hold sorted-key JSON. Section
``tensors`` holds ``count u32`` records of ``name_len u16, name, dtype u8
(0 = float64, 1 = float32), ndim u8, dims u32 * ndim, raw values``.
Serialization is deterministic, so save -> load -> save reproduces the bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .model import VNER, Vocabs

MAGIC = b"VNERCKPT"
VERSION = 1
SECTIONS = ("config", "vocabs", "meta", "tensors")
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1}


class CheckpointError(Exception):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class MissingKeyError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    config: TrainConfig
    vocabs: Vocabs
    tensors: dict[str, np.ndarray]
    epoch: int = 0
    best_dev_f1: float = 0.0
    history: list[dict] = field(default_factory=list)

    @classmethod
    def from_model(cls, model: VNER, epoch: int = 0, best_dev_f1: float = 0.0,
                   history: list[dict] | None = None) -> "Checkpoint":
        tensors = {k: v.data.copy() for k, v in model.parameters().items()}
        return cls(model.config, model.vocabs, tensors, epoch, best_dev_f1, list(history or []))

    def build_model(self) -> VNER:
        model = VNER(self.config, self.vocabs)
        params = model.parameters()
        missing = sorted(set(params) - set(self.tensors))
        if missing:
            raise MissingKeyError(f"checkpoint lacks tensors: {missing}")
        extra = sorted(set(self.tensors) - set(params))
        if extra:
            raise MissingKeyError(f"checkpoint has tensors the model does not know: {extra}")
        for name, p in params.items():
            arr = self.tensors[name]
            if arr.shape != p.shape:
                raise CorruptCheckpointError(f"tensor {name}: shape {arr.shape}, model expects {p.shape}")
            p.data = arr.astype(p.data.dtype, copy=True)
        return model


def _json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _pack_tensors(tensors: dict[str, np.ndarray]) -> bytes:
    out = [struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        code = _CODES.get(arr.dtype)
        if code is None:
            raise CheckpointError(f"tensor {name}: unsupported dtype {arr.dtype}")
        nb = name.encode("utf-8")
        out.append(struct.pack("<H", len(nb)) + nb)
        out.append(struct.pack("<BB", code, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(out)


def to_bytes(ckpt: Checkpoint) -> bytes:
    meta = {"epoch": ckpt.epoch, "best_dev_f1": ckpt.best_dev_f1, "history": ckpt.history}
    sections = {"config": _json(ckpt.config.to_dict()), "vocabs": _json(ckpt.vocabs.to_dict()),
                "meta": _json(meta), "tensors": _pack_tensors(ckpt.tensors)}
    out = [MAGIC, struct.pack("<II", VERSION, len(sections))]
    for name in SECTIONS:
        nb = name.encode()
        out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<Q", len(sections[name])))
        out.append(sections[name])
    return b"".join(out)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptCheckpointError(
                f"file truncated: needed {n} bytes at offset {self.pos}, only {len(self.buf) - self.pos} left")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _unpack_tensors(payload: bytes) -> dict[str, np.ndarray]:
    r = _Reader(payload)
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise CorruptCheckpointError(f"tensor {name}: unknown dtype code {code}")
        shape = r.unpack(f"<{ndim}I")
        dt = _DTYPES[code]
        n = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        tensors[name] = np.frombuffer(r.take(n), dtype=dt).reshape(shape).astype(dt.newbyteorder("="))
    if r.pos != len(payload):
        raise CorruptCheckpointError("trailing bytes after tensor records")
    return tensors


def from_bytes(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CorruptCheckpointError("not a checkpoint file (bad magic bytes)")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, this build reads {VERSION}")
    sections = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8", errors="replace")
        (plen,) = r.unpack("<Q")
        sections[name] = r.take(plen)
    if r.pos != len(buf):
        raise CorruptCheckpointError("trailing bytes after the last section")
    missing = [s for s in SECTIONS if s not in sections]
    if missing:
        raise MissingKeyError(f"checkpoint lacks sections: {missing}")
    try:
        config = TrainConfig.from_dict(json.loads(sections["config"]))
        vocabs = Vocabs.from_dict(json.loads(sections["vocabs"]))
        meta = json.loads(sections["meta"])
    except KeyError as exc:
        raise MissingKeyError(f"checkpoint metadata lacks key {exc}") from None
    except (ValueError, TypeError) as exc:
        raise CorruptCheckpointError(f"unreadable metadata: {exc}") from None
    try:
        epoch, best, history = meta["epoch"], meta["best_dev_f1"], meta["history"]
    except KeyError as exc:
        raise MissingKeyError(f"checkpoint meta lacks key {exc}") from None
    return Checkpoint(config, vocabs, _unpack_tensors(sections["tensors"]), epoch, best, history)


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}") from None
    return from_bytes(buf)
