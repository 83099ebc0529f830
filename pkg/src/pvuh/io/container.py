"""PVUH binary sequence container.

Layout (little-endian):

    header   magic 'PVUH' | version u16 | flags u16 | L u32 | N u32 |
             D u16 | J u16 | frame_rate f32                       (24 bytes)
    frames   per frame, in flag order:
             coords f32[N*D]                          (always)
             labels u8[N]                             (flag bit 0)
             flow   f32[N*3], NaN row = invalid       (flag bit 1)
             vids   u32[N], 0xFFFFFFFF = none         (flag bit 2)
             joints f32[J*3]                          (flag bit 3)
    trailer  crc32 u32 over header + frames

Byte length is exactly derivable from the header, so truncation,
padding, and every corrupted byte are detectable.
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import ContainerError
from ..geom import PointCloudFrame, PointSequence, SequenceMeta

MAGIC = b"PVUH"
VERSION = 1
FLAG_LABELS, FLAG_FLOW, FLAG_VIDS, FLAG_JOINTS = 1, 2, 4, 8
_HEADER = struct.Struct("<4sHHIIHHf")
NO_VERTEX = 0xFFFFFFFF


def _frame_nbytes(flags: int, n: int, d: int, j: int) -> int:
    size = n * d * 4
    if flags & FLAG_LABELS:
        size += n
    if flags & FLAG_FLOW:
        size += n * 3 * 4
    if flags & FLAG_VIDS:
        size += n * 4
    if flags & FLAG_JOINTS:
        size += j * 3 * 4
    return size


def write_sequence(path: str | Path, seq: PointSequence) -> None:
    """Serialize at f32 precision; optional channels must be uniform."""
    frames = seq.frames
    if not frames:
        raise ContainerError("cannot write an empty sequence")
    n = frames[0].n_points
    d = 3
    for f in frames:
        if f.n_points != n:
            raise ContainerError("frames have unequal point counts")

    def uniform(attr):
        have = [getattr(f, attr) is not None for f in frames]
        if any(have) and not all(have):
            raise ContainerError(f"channel {attr} present on only some frames")
        return all(have)

    flags = 0
    if uniform("part_labels"):
        flags |= FLAG_LABELS
    if uniform("flow"):
        flags |= FLAG_FLOW
    if uniform("vertex_ids"):
        flags |= FLAG_VIDS
    joints = seq.meta.joint_gt
    j = 0
    if joints is not None:
        flags |= FLAG_JOINTS
        if len(joints) != len(frames):
            raise ContainerError("joint_gt frame count mismatch")
        j = joints.shape[1]

    out = bytearray(_HEADER.pack(MAGIC, VERSION, flags, len(frames), n, d, j,
                                 float(seq.meta.frame_rate)))
    for t, f in enumerate(frames):
        out += f.points.astype("<f4").tobytes()
        if flags & FLAG_LABELS:
            out += f.part_labels.astype(np.uint8).tobytes()
        if flags & FLAG_FLOW:
            vec = f.flow.astype("<f4").copy()
            if f.flow_valid is not None:
                vec[~f.flow_valid] = np.nan
            out += vec.tobytes()
        if flags & FLAG_VIDS:
            vids = f.vertex_ids.astype(np.int64).copy()
            u = np.where(vids < 0, NO_VERTEX, vids).astype("<u4")
            out += u.tobytes()
        if flags & FLAG_JOINTS:
            out += joints[t].astype("<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(out))


def read_sequence(path: str | Path) -> PointSequence:
    """Parse and CRC-validate a container; every failure is a named error."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size + 4:
        raise ContainerError(f"truncated container: {len(blob)} bytes")
    magic, version, flags, n_frames, n, d, j, frame_rate = \
        _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ContainerError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerError(f"unsupported version {version}")
    if flags & ~(FLAG_LABELS | FLAG_FLOW | FLAG_VIDS | FLAG_JOINTS):
        raise ContainerError(f"unknown flag bits 0x{flags:04x}")
    if d != 3:
        raise ContainerError(f"unsupported point dimension {d}")
    if n_frames == 0 or n == 0:
        raise ContainerError("container declares zero frames or points")
    expected = _HEADER.size + n_frames * _frame_nbytes(flags, n, d, j) + 4
    if len(blob) != expected:
        raise ContainerError(
            f"flag/payload size mismatch: file {len(blob)} B, header implies "
            f"{expected} B")
    stored_crc = struct.unpack_from("<I", blob, len(blob) - 4)[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ContainerError("CRC mismatch: payload corrupted")

    off = _HEADER.size
    joints = np.empty((n_frames, j, 3), dtype=np.float64) if flags & FLAG_JOINTS else None

    def take(count, dtype):
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr

    frames = []
    for t in range(n_frames):
        pts = take(n * d, "<f4").reshape(n, d).astype(np.float64)
        labels = flow = flow_valid = vids = None
        if flags & FLAG_LABELS:
            labels = take(n, np.uint8).astype(np.int16)
        if flags & FLAG_FLOW:
            vec = take(n * 3, "<f4").reshape(n, 3).astype(np.float64)
            flow_valid = ~np.isnan(vec).any(axis=1)
            flow = np.where(flow_valid[:, None], vec, 0.0)
        if flags & FLAG_VIDS:
            u = take(n, "<u4").astype(np.int64)
            vids = np.where(u == NO_VERTEX, -1, u)
        if flags & FLAG_JOINTS:
            joints[t] = take(j * 3, "<f4").reshape(j, 3)
        frames.append(PointCloudFrame(points=pts, part_labels=labels, flow=flow,
                                      flow_valid=flow_valid, vertex_ids=vids))
    return PointSequence(frames=frames,
                         meta=SequenceMeta(frame_rate=frame_rate, joint_gt=joints))
