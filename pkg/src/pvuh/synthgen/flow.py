"""Motion-flow ground truth via shared mesh-vertex correspondence.

Scan points inherit a vertex id from the simulator; the posed vertex
positions of both frames anchor the distance threshold. A connection
survives only when the forward (prev->next) and backward (next->prev)
matching passes coincide, which removes occluded or ambiguous points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geom import PointCloudFrame, knn


@dataclass
class FlowField:
    """Per-point optional motion vectors for one frame."""

    vectors: np.ndarray  # (N, 3), zero where invalid
    valid: np.ndarray    # (N,) bool

    def __post_init__(self):
        if len(self.vectors) != len(self.valid):
            raise ValueError("vectors/valid length mismatch")

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())


def _representatives(points: np.ndarray, vertex_ids: np.ndarray,
                     verts: np.ndarray, threshold: float) -> dict[int, int]:
    """vertex id -> index of its closest matched point (within threshold).

    Ties resolve to the lower point index.
    """
    ok = vertex_ids >= 0
    idx = np.where(ok)[0]
    if len(idx) == 0:
        return {}
    vids = vertex_ids[idx]
    d = np.linalg.norm(points[idx] - verts[vids], axis=1)
    inside = d < threshold
    idx, vids, d = idx[inside], vids[inside], d[inside]
    # sort by (vertex, distance, point index); first row per vertex wins
    order = np.lexsort((idx, d, vids))
    vids_sorted = vids[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = vids_sorted[1:] != vids_sorted[:-1]
    return dict(zip(vids_sorted[first].tolist(), idx[order][first].tolist()))


def flow_ground_truth(frame_t: PointCloudFrame, frame_t1: PointCloudFrame,
                      verts_t: np.ndarray, verts_t1: np.ndarray,
                      threshold: float = 0.10) -> FlowField:
    """Bidirectionally-filtered vertex-mediated flow for ``frame_t``.

    Both frames must carry vertex ids referring to the same actor mesh;
    ``verts_t``/``verts_t1`` are that mesh's posed vertices. A frame-t
    point gets a flow vector only when it is its vertex's closest match
    (within ``threshold``) in frame t, the same vertex has a match in
    frame t+1, and that match points back to it.
    """
    if frame_t.vertex_ids is None or frame_t1.vertex_ids is None:
        raise ValueError("both frames need vertex_id channels")
    verts_t = np.asarray(verts_t, dtype=np.float64)
    verts_t1 = np.asarray(verts_t1, dtype=np.float64)
    if verts_t.shape != verts_t1.shape:
        raise ValueError("mismatched actors: vertex tables differ in shape")
    for f in (frame_t, frame_t1):
        if f.vertex_ids.max(initial=-1) >= len(verts_t):
            raise ValueError("mismatched actors: vertex id out of range")

    rep_t = _representatives(frame_t.points, frame_t.vertex_ids, verts_t, threshold)
    rep_t1 = _representatives(frame_t1.points, frame_t1.vertex_ids, verts_t1, threshold)

    n = frame_t.n_points
    vectors = np.zeros((n, 3))
    valid = np.zeros(n, dtype=bool)
    for v, i in rep_t.items():
        j = rep_t1.get(v)
        if j is None:
            continue
        vectors[i] = frame_t1.points[j] - frame_t.points[i]
        valid[i] = True
    return FlowField(vectors=vectors, valid=valid)


def nn_flow_baseline(frame_t: PointCloudFrame, frame_t1: PointCloudFrame) -> FlowField:
    """Nearest-point displacement; always valid. Stand-in flow estimator."""
    if frame_t.n_points == 0 or frame_t1.n_points == 0:
        raise ValueError("empty frame")
    idx, _ = knn(frame_t.points, frame_t1.points, 1)
    vectors = frame_t1.points[idx[:, 0]] - frame_t.points
    return FlowField(vectors=vectors, valid=np.ones(frame_t.n_points, dtype=bool))


def attach_flow(frame: PointCloudFrame, field: FlowField) -> None:
    """Store a flow field on the frame's channels (in place)."""
    if len(field.vectors) != frame.n_points:
        raise ValueError("flow field size does not match frame")
    frame.flow = field.vectors.copy()
    frame.flow_valid = field.valid.copy()
