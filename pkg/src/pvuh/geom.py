"""Core geometry kernels and point-sequence containers.

Pure functions over immutable numpy inputs; every routine here is
deterministic and thread-safe. Distances are squared-Euclidean
internally and converted to metric distances only where the API
promises them.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = [
    "PointCloudFrame",
    "SequenceMeta",
    "PointSequence",
    "NormRecord",
    "fps",
    "knn",
    "chamfer_l2",
    "normalize_sequence",
    "denormalize_sequence",
    "ray_triangle_intersect",
    "cast_rays",
]

NOISE_LABEL = 9
NUM_PARTS = 9


@dataclass
class PointCloudFrame:
    """One frame of a point cloud video.

    Attributes:
        points: ``(N, 3)`` coordinates in world units (meters unless the
            sequence has been normalized).
        part_labels: optional ``(N,)`` integers in ``0..9`` (9 = noise).
        flow: optional ``(N, 3)`` per-point motion to the next frame.
        flow_valid: optional ``(N,)`` booleans; rows with ``False`` carry
            no meaningful flow vector.
        vertex_ids: optional ``(N,)`` source-mesh vertex indices, ``-1``
            where no vertex is associated.
    """

    points: np.ndarray
    part_labels: Optional[np.ndarray] = None
    flow: Optional[np.ndarray] = None
    flow_valid: Optional[np.ndarray] = None
    vertex_ids: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError(f"points must be (N, 3), got {self.points.shape}")
        n = len(self.points)
        for name in ("part_labels", "flow", "flow_valid", "vertex_ids"):
            ch = getattr(self, name)
            if ch is not None and len(ch) != n:
                raise ValueError(f"channel {name} has length {len(ch)}, expected {n}")

    @property
    def n_points(self) -> int:
        return len(self.points)

    def copy(self) -> "PointCloudFrame":
        return PointCloudFrame(
            points=self.points.copy(),
            part_labels=None if self.part_labels is None else self.part_labels.copy(),
            flow=None if self.flow is None else self.flow.copy(),
            flow_valid=None if self.flow_valid is None else self.flow_valid.copy(),
            vertex_ids=None if self.vertex_ids is None else self.vertex_ids.copy(),
        )

    def select(self, indices: np.ndarray) -> "PointCloudFrame":
        """Frame restricted to ``indices`` (all channels gathered)."""
        idx = np.asarray(indices)
        return PointCloudFrame(
            points=self.points[idx],
            part_labels=None if self.part_labels is None else self.part_labels[idx],
            flow=None if self.flow is None else self.flow[idx],
            flow_valid=None if self.flow_valid is None else self.flow_valid[idx],
            vertex_ids=None if self.vertex_ids is None else self.vertex_ids[idx],
        )


@dataclass
class SequenceMeta:
    frame_rate: float = 10.0
    actor_id: int = 0
    motion_class: str = ""
    joint_gt: Optional[np.ndarray] = None  # (L, J, 3)


@dataclass
class PointSequence:
    """L frames of a single human instance."""

    frames: list[PointCloudFrame]
    meta: SequenceMeta = field(default_factory=SequenceMeta)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def n_points(self) -> int:
        return self.frames[0].n_points if self.frames else 0

    def all_points(self) -> np.ndarray:
        return np.concatenate([f.points for f in self.frames], axis=0)


@dataclass(frozen=True)
class NormRecord:
    """Inverse transform for :func:`normalize_sequence`."""

    centroid: np.ndarray  # (3,)
    scale: float


def fps(points: np.ndarray, k: int, start_index: int = 0) -> np.ndarray:
    """Farthest point sampling.

    Greedily selects ``k`` indices maximizing the minimum distance to the
    already-selected set, starting from ``start_index``. When ``k``
    exceeds the number of points, the full selection order is repeated
    round-robin so the result always has length ``k``.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n == 0:
        raise ValueError("empty point set")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not (0 <= start_index < n):
        raise ValueError(f"start_index {start_index} out of range for {n} points")

    m = min(k, n)
    order = np.empty(m, dtype=np.int64)
    order[0] = start_index
    # squared distance to the selected set; ties resolve to the lowest index
    min_d2 = np.sum((pts - pts[start_index]) ** 2, axis=1)
    for i in range(1, m):
        nxt = int(np.argmax(min_d2))
        order[i] = nxt
        d2 = np.sum((pts - pts[nxt]) ** 2, axis=1)
        np.minimum(min_d2, d2, out=min_d2)
    if k <= n:
        return order
    reps = -(-k // n)  # ceil
    return np.tile(order, reps)[:k]


def knn(query: np.ndarray, reference: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k-nearest-neighbours by brute force.

    Returns ``(indices, distances)`` of shape ``(Q, k)``, each query row
    sorted by ascending Euclidean distance with ties broken by lower
    reference index.
    """
    q = np.atleast_2d(np.asarray(query, dtype=np.float64))
    r = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    if len(r) == 0:
        raise ValueError("empty reference set")
    if k > len(r):
        raise ValueError(f"k={k} exceeds reference size {len(r)}")
    d2 = ((q[:, None, :] - r[None, :, :]) ** 2).sum(axis=-1)
    # stable sort keeps lower indices first on exact ties
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    dist = np.sqrt(np.take_along_axis(d2, idx, axis=1))
    return idx, dist


def chamfer_l2(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean squared nearest-neighbour distance between two sets.

    ``(1/|A|) sum_x min_y ||x-y||^2 + (1/|B|) sum_y min_x ||y-x||^2``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty point set")
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())


def normalize_sequence(seq: PointSequence) -> tuple[PointSequence, NormRecord]:
    """Center a sequence on its global centroid and scale it into the unit ball.

    The centroid is taken over all points of all frames; the scale is the
    maximum centered point norm (1.0 for a degenerate sequence). Flow
    channels are divided by the same scale (translation leaves vectors
    unchanged); ``joint_gt`` is mapped like the points.
    """
    if not seq.frames:
        raise ValueError("empty sequence")
    pts = seq.all_points()
    centroid = pts.mean(axis=0)
    radius = float(np.linalg.norm(pts - centroid, axis=1).max())
    scale = radius if radius > 1e-12 else 1.0

    frames = []
    for f in seq.frames:
        g = f.copy()
        g.points = (f.points - centroid) / scale
        if g.flow is not None:
            g.flow = g.flow / scale
        frames.append(g)
    meta = replace(seq.meta)
    if seq.meta.joint_gt is not None:
        meta.joint_gt = (seq.meta.joint_gt - centroid) / scale
    return PointSequence(frames=frames, meta=meta), NormRecord(centroid=centroid, scale=scale)


def denormalize_sequence(seq: PointSequence, rec: NormRecord) -> PointSequence:
    """Exact inverse of :func:`normalize_sequence`."""
    frames = []
    for f in seq.frames:
        g = f.copy()
        g.points = f.points * rec.scale + rec.centroid
        if g.flow is not None:
            g.flow = g.flow * rec.scale
        frames.append(g)
    meta = replace(seq.meta)
    if seq.meta.joint_gt is not None:
        meta.joint_gt = seq.meta.joint_gt * rec.scale + rec.centroid
    return PointSequence(frames=frames, meta=meta)


def ray_triangle_intersect(
    origin: np.ndarray, direction: np.ndarray, triangle: np.ndarray
) -> Optional[float]:
    """Moller-Trumbore ray/triangle test.

    Returns the positive parametric hit distance (in units of
    ``|direction|``) or ``None`` on a miss. Edge hits are inclusive; the
    caller resolves shared-edge ties by lowest triangle id.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    tri = np.asarray(triangle, dtype=np.float64)
    if not np.any(d):
        raise ValueError("direction must be non-zero")
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    pvec = np.cross(d, e2)
    det = float(e1 @ pvec)
    if abs(det) < 1e-12:
        return None
    inv = 1.0 / det
    tvec = o - tri[0]
    u = float(tvec @ pvec) * inv
    if u < 0.0 or u > 1.0:
        return None
    qvec = np.cross(tvec, e1)
    v = float(d @ qvec) * inv
    if v < 0.0 or u + v > 1.0:
        return None
    t = float(e2 @ qvec) * inv
    if t <= 1e-12:
        return None
    return t


def cast_rays(
    origin: np.ndarray, directions: np.ndarray, triangles: np.ndarray,
    chunk: int = 512,
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-hit query for many rays from one origin against a mesh.

    Args:
        origin: ``(3,)`` shared ray origin.
        directions: ``(R, 3)`` ray directions (need not be unit length).
        triangles: ``(T, 3, 3)`` vertex coordinates per triangle.
        chunk: rays processed per vectorized block (memory bound).

    Returns:
        ``(dist, tri_idx)`` arrays of shape ``(R,)``; misses carry
        ``inf`` distance and index ``-1``. Exact distance ties resolve to
        the lowest triangle id, so shared edges hit exactly one triangle.
    """
    o = np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(directions, dtype=np.float64)
    tris = np.asarray(triangles, dtype=np.float64)
    n_rays = len(dirs)
    out_t = np.full(n_rays, np.inf)
    out_i = np.full(n_rays, -1, dtype=np.int64)
    if len(tris) == 0 or n_rays == 0:
        return out_t, out_i

    e1 = tris[:, 1] - tris[:, 0]  # (T, 3)
    e2 = tris[:, 2] - tris[:, 0]
    tvec = o - tris[:, 0]  # (T, 3), shared origin
    qvec = np.cross(tvec, e1)  # (T, 3), ray-independent for a shared origin
    t_num = np.einsum("tk,tk->t", e2, qvec)

    for s in range(0, n_rays, chunk):
        d = dirs[s : s + chunk]  # (R, 3)
        pvec = np.cross(d[:, None, :], e2[None, :, :])  # (R, T, 3)
        det = np.einsum("tk,rtk->rt", e1, pvec)
        ok = np.abs(det) >= 1e-12
        inv = np.where(ok, 1.0, np.nan) / np.where(ok, det, 1.0)
        u = np.einsum("tk,rtk->rt", tvec, pvec) * inv
        ok &= (u >= 0.0) & (u <= 1.0)
        v = np.einsum("rk,tk->rt", d, qvec) * inv
        ok &= (v >= 0.0) & (u + v <= 1.0)
        t = t_num[None, :] * inv
        ok &= t > 1e-12
        t = np.where(ok, t, np.inf)
        # argmin returns the first (lowest-id) triangle on exact ties
        best = np.argmin(t, axis=1)
        rows = np.arange(len(d))
        bt = t[rows, best]
        hit = np.isfinite(bt)
        out_t[s : s + chunk][hit] = bt[hit]
        out_i[s : s + chunk][hit] = best[hit]
    return out_t, out_i
