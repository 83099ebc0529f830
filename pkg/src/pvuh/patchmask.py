"""Part-patch tensorization and the temporal-then-spatial mask plan.

A labeled sequence becomes a fixed-shape ``(L, M, N', 3)`` patch grid:
per frame, the points of each of the 9 body parts are farthest-point
sampled (cycling when scarce) to N' points. Masking first hides whole
frames at ratio ``r_t``, then hides random parts inside each remaining
frame at ratio ``r_s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError
from .geom import NUM_PARTS, PointCloudFrame, PointSequence, fps


@dataclass
class PatchTensor:
    """Fixed-shape per-part patches of one sequence.

    ``patches`` holds raw (uncentered) coordinates; ``centers`` is the
    arithmetic mean of each patch. Parts with no real points are filled
    with the frame centroid and flagged in ``absent``.
    """

    patches: np.ndarray                  # (L, M, N', 3)
    centers: np.ndarray                  # (L, M, 3)
    absent: np.ndarray                   # (L, M) bool
    flow_patches: Optional[np.ndarray]   # (L, M, N', 3) or None
    frame_points: np.ndarray             # (L, N, 3) full frames
    frame_centroids: np.ndarray          # (L, 3)

    @property
    def n_frames(self) -> int:
        return self.patches.shape[0]

    @property
    def n_parts(self) -> int:
        return self.patches.shape[1]

    @property
    def n_patch_points(self) -> int:
        return self.patches.shape[2]


@dataclass(frozen=True)
class MaskPlan:
    """Which (frame, part) slots are hidden, and how."""

    n_frames: int
    n_parts: int
    masked_frames: tuple[int, ...]              # temporally masked frames
    spatial_masked: dict[int, tuple[int, ...]]  # visible frame -> masked parts
    seed: int

    @property
    def visible_frames(self) -> tuple[int, ...]:
        hidden = set(self.masked_frames)
        return tuple(f for f in range(self.n_frames) if f not in hidden)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def group_by_part(frame: PointCloudFrame) -> list[np.ndarray]:
    """Indices of each of the 9 parts' points; noise points are dropped."""
    if frame.part_labels is None:
        raise ValueError("frame has no part labels")
    labels = frame.part_labels
    return [np.where(labels == p)[0] for p in range(NUM_PARTS)]


def build_patch_tensor(seq: PointSequence, with_flow: bool = False,
                       seed: int = 0, n_patch_points: int = 48) -> PatchTensor:
    """FPS-resample every part of every frame to the fixed patch shape.

    The per-patch FPS start index is drawn from ``seed``; identical
    inputs and seed give a bit-identical tensor.
    """
    if not seq.frames:
        raise ValueError("empty sequence")
    n = seq.frames[0].n_points
    for f in seq.frames:
        if f.n_points != n:
            raise DataError("frames have unequal point counts; preprocess first")
        if with_flow and (f.flow is None or f.flow_valid is None):
            raise DataError("with_flow requires flow channels on every frame")

    rng = np.random.default_rng(seed)
    L, M, NP = len(seq.frames), NUM_PARTS, n_patch_points
    patches = np.zeros((L, M, NP, 3))
    centers = np.zeros((L, M, 3))
    absent = np.zeros((L, M), dtype=bool)
    flow_patches = np.zeros((L, M, NP, 3)) if with_flow else None
    frame_points = np.stack([f.points for f in seq.frames])

    for t, frame in enumerate(seq.frames):
        centroid = frame.points.mean(axis=0)
        for p, grp in enumerate(group_by_part(frame)):
            if len(grp) == 0:
                patches[t, p] = centroid
                centers[t, p] = centroid
                absent[t, p] = True
                continue
            start = int(rng.integers(len(grp)))
            sel = grp[fps(frame.points[grp], NP, start_index=start)]
            patches[t, p] = frame.points[sel]
            centers[t, p] = patches[t, p].mean(axis=0)
            if with_flow:
                valid = frame.flow_valid[sel]
                flow_patches[t, p] = np.where(valid[:, None], frame.flow[sel], 0.0)

    return PatchTensor(patches=patches, centers=centers, absent=absent,
                       flow_patches=flow_patches, frame_points=frame_points,
                       frame_centroids=frame_points.mean(axis=1))


def plan_mask(n_frames: int, n_parts: int, r_t: float, r_s: float,
              seed: int = 0) -> MaskPlan:
    """Sample the temporal-then-spatial mask bookkeeping.

    ``round_half_up(r_t * L)`` whole frames are hidden, then
    ``round_half_up(r_s * M)`` parts inside every remaining frame.
    """
    if not (0 <= r_t < 1 and 0 <= r_s < 1):
        raise ValueError("mask ratios must be in [0, 1)")
    rng = np.random.default_rng(seed)
    n_tmask = round_half_up(r_t * n_frames)
    masked_frames = tuple(sorted(
        rng.choice(n_frames, size=n_tmask, replace=False).tolist()))
    n_smask = round_half_up(r_s * n_parts)
    hidden = set(masked_frames)
    spatial = {}
    for f in range(n_frames):
        if f in hidden:
            continue
        spatial[f] = tuple(sorted(
            rng.choice(n_parts, size=n_smask, replace=False).tolist()))
    return MaskPlan(n_frames=n_frames, n_parts=n_parts,
                    masked_frames=masked_frames, spatial_masked=spatial, seed=seed)


@dataclass
class MaskedPatches:
    """The three disjoint token groups plus re-scatter bookkeeping.

    Raw patches allow a bit-exact round trip; targets are stored in
    patch-centered coordinates for the reconstruction loss. ``*_slots``
    are flat ``frame * M + part`` ids.
    """

    n_frames: int
    n_parts: int
    n_patch_points: int

    visible_patches: np.ndarray   # (n_v, N', 3) raw
    visible_centers: np.ndarray
    visible_slots: np.ndarray
    visible_absent: np.ndarray

    spatial_raw: np.ndarray       # (n_s, N', 3)
    spatial_targets: np.ndarray   # patch-centered
    spatial_centers: np.ndarray
    spatial_slots: np.ndarray
    spatial_absent: np.ndarray

    temporal_raw: np.ndarray
    temporal_targets: np.ndarray
    temporal_centers: np.ndarray
    temporal_slots: np.ndarray
    temporal_absent: np.ndarray

    def slot_frames(self, slots: np.ndarray) -> np.ndarray:
        return slots // self.n_parts

    def slot_parts(self, slots: np.ndarray) -> np.ndarray:
        return slots % self.n_parts

    def rescatter(self) -> np.ndarray:
        """Rebuild the (L, M, N', 3) grid from the three raw groups."""
        out = np.empty((self.n_frames * self.n_parts, self.n_patch_points, 3))
        out[self.visible_slots] = self.visible_patches
        out[self.spatial_slots] = self.spatial_raw
        out[self.temporal_slots] = self.temporal_raw
        return out.reshape(self.n_frames, self.n_parts, self.n_patch_points, 3)


def apply_mask(pt: PatchTensor, plan: MaskPlan) -> MaskedPatches:
    """Partition all L*M slots into visible / spatially / temporally masked."""
    if (plan.n_frames, plan.n_parts) != (pt.n_frames, pt.n_parts):
        raise ValueError(
            f"plan is {plan.n_frames}x{plan.n_parts}, tensor is "
            f"{pt.n_frames}x{pt.n_parts}")
    M = pt.n_parts

    vis_slots, s_slots = [], []
    for f in plan.visible_frames:
        masked = set(plan.spatial_masked.get(f, ()))
        for p in range(M):
            (s_slots if p in masked else vis_slots).append(f * M + p)
    t_slots = [f * M + p for f in plan.masked_frames for p in range(M)]

    def gather(slots):
        slots = np.asarray(slots, dtype=np.int64)
        f, p = slots // M, slots % M
        return (pt.patches[f, p], pt.centers[f, p], pt.absent[f, p], slots)

    vp, vc, va, vs = gather(vis_slots)
    sp, sc, sa, ss = gather(s_slots)
    tp, tc, ta, ts = gather(t_slots)
    return MaskedPatches(
        n_frames=pt.n_frames, n_parts=M, n_patch_points=pt.n_patch_points,
        visible_patches=vp, visible_centers=vc, visible_slots=vs, visible_absent=va,
        spatial_raw=sp, spatial_targets=sp - sc[:, None, :], spatial_centers=sc,
        spatial_slots=ss, spatial_absent=sa,
        temporal_raw=tp, temporal_targets=tp - tc[:, None, :], temporal_centers=tc,
        temporal_slots=ts, temporal_absent=ta,
    )
