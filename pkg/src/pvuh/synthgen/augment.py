"""Occlusion and attached-noise augmentation for scanned frames.

Both operations never relabel pre-existing points and are deterministic
per seed.
"""
from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..geom import PointCloudFrame
from .labels import NOISE


def add_noise_objects(frame: PointCloudFrame, count: int, seed: int = 0) -> PointCloudFrame:
    """Append ``count`` blob clusters attached near random body points.

    Each cluster is an ellipsoidal gaussian of 10..40 points centered
    within 0.3 m of an existing point; new points get the noise label
    and no vertex id / flow.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return frame.copy()
    rng = np.random.default_rng(seed)
    blobs = []
    for _ in range(count):
        anchor = frame.points[int(rng.integers(frame.n_points))]
        offset = rng.uniform(-1, 1, size=3)
        offset *= rng.uniform(0.05, 0.28) / max(np.linalg.norm(offset), 1e-9)
        center = anchor + offset
        n = int(rng.integers(10, 41))
        axes = rng.uniform(0.02, 0.09, size=3)
        blobs.append(center + rng.normal(size=(n, 3)) * axes)
    extra = np.concatenate(blobs)
    n_new = len(extra)

    out = frame.copy()
    out.points = np.concatenate([out.points, extra])
    if out.part_labels is not None:
        out.part_labels = np.concatenate(
            [out.part_labels, np.full(n_new, NOISE, dtype=out.part_labels.dtype)])
    if out.vertex_ids is not None:
        out.vertex_ids = np.concatenate(
            [out.vertex_ids, np.full(n_new, -1, dtype=out.vertex_ids.dtype)])
    if out.flow is not None:
        out.flow = np.concatenate([out.flow, np.zeros((n_new, 3))])
    if out.flow_valid is not None:
        out.flow_valid = np.concatenate([out.flow_valid, np.zeros(n_new, dtype=bool)])
    return out


def crop_occlusion(frame: PointCloudFrame, fraction: float, seed: int = 0) -> PointCloudFrame:
    """Remove a random half-space so that >= ``fraction`` of points go.

    The cut plane's normal is seeded-random; the offset is the smallest
    achievable so at least ``ceil(fraction * N)`` points fall on the
    removed side (exact for tie-free projections).
    """
    if not 0 <= fraction < 1:
        raise ValueError("fraction must be in [0, 1)")
    if fraction == 0:
        return frame.copy()
    rng = np.random.default_rng(seed)
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    s = frame.points @ normal
    n = frame.n_points
    k = int(np.ceil(fraction * n))
    cutoff = np.partition(s, n - k)[n - k]
    keep = s < cutoff
    if not keep.any():
        raise DataError("occlusion crop removed every point")
    return frame.select(np.where(keep)[0])
