"""PVUC checkpoint format.

Layout (little-endian):

    magic 'PVUC' | version u16 | stage u8 | config digest (32 raw bytes)
    n_params u32
    per param: name_len u16 | name utf-8 | ndim u8 | dims u32[ndim] |
               payload f32[prod(dims)]
    opt_flag u8; if 1: step u64, then per param (same order):
               m f32[prod], v f32[prod]
    crc32 u32 over everything above
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import CheckpointError
from ..model import ModelConfig

MAGIC = b"PVUC"
VERSION = 1
STAGES = ("pretrain", "finetune")


@dataclass
class Checkpoint:
    stage: str
    config_digest: str
    weights: dict[str, np.ndarray]
    opt_state: Optional[dict] = None  # {"step": int, "m": {...}, "v": {...}}

    def verify_config(self, cfg: ModelConfig) -> None:
        if cfg.digest() != self.config_digest:
            raise CheckpointError(
                "checkpoint was written with a different model config "
                f"(digest {self.config_digest[:12]}... vs {cfg.digest()[:12]}...)")


def save_checkpoint(path: str | Path, stage: str, cfg: ModelConfig,
                    weights: dict[str, np.ndarray],
                    opt_state: Optional[dict] = None) -> None:
    if stage not in STAGES:
        raise CheckpointError(f"unknown stage {stage!r}")
    if len(set(weights)) != len(weights):
        raise CheckpointError("duplicate parameter names")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HB", VERSION, STAGES.index(stage))
    out += bytes.fromhex(cfg.digest())
    out += struct.pack("<I", len(weights))
    for name, arr in weights.items():
        arr = np.asarray(arr)
        nb = name.encode()
        out += struct.pack("<H", len(nb)) + nb
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.astype("<f4").tobytes()
    if opt_state is None:
        out += struct.pack("<B", 0)
    else:
        out += struct.pack("<B", 1)
        out += struct.pack("<Q", int(opt_state["step"]))
        for name, arr in weights.items():
            out += np.asarray(opt_state["m"][name]).astype("<f4").tobytes()
            out += np.asarray(opt_state["v"][name]).astype("<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise CheckpointError(
                f"truncated checkpoint: wanted {n} bytes at offset {self.off}, "
                f"file has {len(self.blob)}")
        piece = self.blob[self.off:self.off + n]
        self.off += n
        return piece

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, count: int) -> np.ndarray:
        raw = self.take(count * 4)
        return np.frombuffer(raw, dtype="<f4").astype(np.float32).copy()


def load_checkpoint(path: str | Path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < 4 + 3 + 32 + 4 + 1 + 4:
        raise CheckpointError(f"truncated checkpoint: {len(blob)} bytes")
    stored_crc = struct.unpack_from("<I", blob, len(blob) - 4)[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError("CRC mismatch: checkpoint corrupted")
    r = _Reader(blob[:-4])
    if r.take(4) != MAGIC:
        raise CheckpointError("bad magic")
    version, stage_id = r.unpack("<HB")
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}")
    if stage_id >= len(STAGES):
        raise CheckpointError(f"unknown stage tag {stage_id}")
    digest = r.take(32).hex()
    (n_params,) = r.unpack("<I")
    if n_params > 1_000_000:
        raise CheckpointError(f"implausible parameter count {n_params}")

    weights: dict[str, np.ndarray] = {}
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(n_params):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8", errors="strict")
        (ndim,) = r.unpack("<B")
        if ndim > 8:
            raise CheckpointError(f"implausible ndim {ndim} for {name!r}")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if count > 500_000_000:
            raise CheckpointError(f"implausible parameter size for {name!r}")
        if name in weights:
            raise CheckpointError(f"duplicate parameter {name!r}")
        weights[name] = r.array(count).reshape(shape)
        shapes.append((name, shape))

    (opt_flag,) = r.unpack("<B")
    opt_state = None
    if opt_flag == 1:
        (step,) = r.unpack("<Q")
        m, v = {}, {}
        for name, shape in shapes:
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            m[name] = r.array(count).reshape(shape)
            v[name] = r.array(count).reshape(shape)
        opt_state = {"step": int(step), "m": m, "v": v}
    elif opt_flag != 0:
        raise CheckpointError(f"bad optimizer flag {opt_flag}")
    if r.off != len(r.blob):
        raise CheckpointError(f"{len(r.blob) - r.off} trailing bytes")
    return Checkpoint(stage=STAGES[stage_id], config_digest=digest,
                      weights=weights, opt_state=opt_state)
