"""Body-part taxonomy, the 24->9 label simplification, and a coarse
geometric fallback labeler."""
from __future__ import annotations

import numpy as np

HEAD, LEFT_ARM, RIGHT_ARM, UP_BODY, LOW_BODY = 0, 1, 2, 3, 4
UPLEFT_LEG, UPRIGHT_LEG, LOWLEFT_LEG, LOWRIGHT_LEG = 5, 6, 7, 8
NOISE = 9

PART_NAMES = (
    "head", "left_arm", "right_arm", "up_body", "low_body",
    "upleft_leg", "upright_leg", "lowleft_leg", "lowright_leg",
)

# 24-part skeleton-style labels (pelvis..right_hand) collapsed onto the
# nine-part taxonomy: hands fold into arms, feet into lower legs, the
# neck into the head, collars and upper spine into the upper body, and
# the lowest spine joint into the lower body.
LABEL_24_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    "left_hand", "right_hand",
)

_MAP_24_TO_9 = np.array([
    LOW_BODY,      # 0  pelvis
    UPLEFT_LEG,    # 1  left_hip
    UPRIGHT_LEG,   # 2  right_hip
    LOW_BODY,      # 3  spine1
    LOWLEFT_LEG,   # 4  left_knee
    LOWRIGHT_LEG,  # 5  right_knee
    UP_BODY,       # 6  spine2
    LOWLEFT_LEG,   # 7  left_ankle
    LOWRIGHT_LEG,  # 8  right_ankle
    UP_BODY,       # 9  spine3
    LOWLEFT_LEG,   # 10 left_foot
    LOWRIGHT_LEG,  # 11 right_foot
    HEAD,          # 12 neck
    UP_BODY,       # 13 left_collar
    UP_BODY,       # 14 right_collar
    HEAD,          # 15 head
    LEFT_ARM,      # 16 left_shoulder
    RIGHT_ARM,     # 17 right_shoulder
    LEFT_ARM,      # 18 left_elbow
    RIGHT_ARM,     # 19 right_elbow
    LEFT_ARM,      # 20 left_wrist
    RIGHT_ARM,     # 21 right_wrist
    LEFT_ARM,      # 22 left_hand
    RIGHT_ARM,     # 23 right_hand
], dtype=np.int16)


def map24to9(label24: int) -> int:
    """Collapse a 24-part label onto the 9-part taxonomy."""
    if not 0 <= label24 < 24:
        raise ValueError(f"label {label24} outside 0..23")
    return int(_MAP_24_TO_9[label24])


def heuristic_part_labeler(points: np.ndarray) -> np.ndarray:
    """Height-slab / sagittal-side part assignment.

    Expects an upright (z-up) human cloud in the canonical facing pose
    (left side toward +y). Deliberately coarse: a fallback when no
    segmentation labels exist.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("expected a non-empty (N, 3) cloud")
    z = pts[:, 2]
    zmin, zmax = z.min(), z.max()
    span = max(zmax - zmin, 1e-9)
    z01 = (z - zmin) / span
    lat = pts[:, 1] - np.median(pts[:, 1])
    left = lat > 0
    alat = np.abs(lat)

    labels = np.empty(len(pts), dtype=np.int16)
    low = z01 < 0.27
    labels[low] = np.where(left[low], LOWLEFT_LEG, LOWRIGHT_LEG)
    upper = (z01 >= 0.27) & (z01 < 0.44)
    labels[upper] = np.where(left[upper], UPLEFT_LEG, UPRIGHT_LEG)
    labels[(z01 >= 0.44) & (z01 < 0.60)] = LOW_BODY
    labels[(z01 >= 0.60) & (z01 < 0.85)] = UP_BODY
    labels[z01 >= 0.85] = HEAD
    # arms hang laterally outside the torso/leg silhouette
    arms = (z01 >= 0.27) & (z01 < 0.85) & \
        (alat > np.where(z01 >= 0.60, 0.088, 0.105) * span)
    labels[arms] = np.where(left[arms], LEFT_ARM, RIGHT_ARM)
    return labels
