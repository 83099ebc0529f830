"""ASCII PLY snapshots of single frames for offline inspection."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..geom import PointCloudFrame

# fixed 10-color palette: the nine parts plus the reserved noise gray
PART_PALETTE = (
    (230, 60, 60),    # 0 head
    (60, 120, 230),   # 1 left arm
    (60, 200, 230),   # 2 right arm
    (240, 170, 50),   # 3 upper body
    (170, 120, 60),   # 4 lower body
    (90, 200, 90),    # 5 upper left leg
    (40, 140, 60),    # 6 upper right leg
    (190, 90, 200),   # 7 lower left leg
    (120, 60, 160),   # 8 lower right leg
    (128, 128, 128),  # 9 noise
)
COLD = np.array([59, 76, 192], dtype=np.float64)   # zero flow magnitude
HOT = np.array([180, 4, 38], dtype=np.float64)
GRAY = (128, 128, 128)


def frame_colors(frame: PointCloudFrame, color_by: str) -> np.ndarray:
    if color_by == "part":
        if frame.part_labels is None:
            raise ValueError("frame has no part labels to color by")
        return np.array([PART_PALETTE[int(p)] for p in frame.part_labels],
                        dtype=np.int64)
    if color_by == "flow-magnitude":
        if frame.flow is None:
            raise ValueError("frame has no flow channel to color by")
        mag = np.linalg.norm(frame.flow, axis=1)
        valid = frame.flow_valid if frame.flow_valid is not None \
            else np.ones(frame.n_points, dtype=bool)
        top = mag[valid].max() if valid.any() and mag[valid].max() > 0 else 1.0
        ramp = np.clip(mag / top, 0.0, 1.0)[:, None]
        colors = np.rint(COLD + ramp * (HOT - COLD)).astype(np.int64)
        colors[~valid] = GRAY
        return colors
    if color_by == "none":
        return np.full((frame.n_points, 3), 255, dtype=np.int64)
    raise ValueError(f"unknown coloring {color_by!r}")


def export_ply(path: str | Path, frame: PointCloudFrame,
               color_by: str = "part") -> None:
    if frame.n_points == 0:
        raise ValueError("cannot export an empty frame")
    colors = frame_colors(frame, color_by)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {frame.n_points}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for p, c in zip(frame.points, colors):
        lines.append(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]} {c[1]} {c[2]}")
    Path(path).write_text("\n".join(lines) + "\n")
