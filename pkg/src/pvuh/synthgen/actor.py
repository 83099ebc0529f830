"""Procedural articulated human: nine labeled capsule segments.

The actor stands in a T-ish bind pose, z-up, facing +x, left side at
+y. Vertex ids, faces, and per-vertex part labels are fixed at build
time and never change under posing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .labels import HEAD, LEFT_ARM, RIGHT_ARM, UP_BODY, LOW_BODY, \
    UPLEFT_LEG, UPRIGHT_LEG, LOWLEFT_LEG, LOWRIGHT_LEG


@dataclass(frozen=True)
class BodyProportions:
    """Relative segment geometry, in fractions of total height."""

    hip_height: float = 0.52
    waist_height: float = 0.58
    shoulder_height: float = 0.79
    neck_height: float = 0.83
    hip_halfwidth: float = 0.055
    shoulder_halfwidth: float = 0.13
    torso_radius: float = 0.082
    pelvis_radius: float = 0.080
    head_radius: float = 0.058
    arm_radius: float = 0.034
    upper_leg_radius: float = 0.052
    lower_leg_radius: float = 0.038
    wrist_height: float = 0.44
    knee_height: float = 0.28
    ankle_height: float = 0.035
    radial_segments: int = 8
    cylinder_rings: int = 4
    cap_rings: int = 2


@dataclass
class Segment:
    name: str
    label: int
    parent: int  # index into the segment list, -1 for the root
    pivot: np.ndarray  # (3,) bind-pose joint position


@dataclass
class ActorModel:
    """Labeled capsule mesh plus its rigid skeleton.

    ``vertices`` is the bind pose; ``vertex_segment`` drives rigid
    skinning, so posed frames keep vertex count, ids, and labels fixed.
    """

    segments: list[Segment]
    vertices: np.ndarray        # (V, 3) bind pose
    faces: np.ndarray           # (F, 3) vertex indices
    vertex_part: np.ndarray     # (V,) labels 0..8
    vertex_segment: np.ndarray  # (V,) segment index
    height: float
    head_top: np.ndarray = field(default=None)  # (3,) bind pose

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def joint_pivots(self) -> np.ndarray:
        """(10, 3): the nine segment pivots followed by the head top."""
        piv = np.stack([s.pivot for s in self.segments])
        return np.concatenate([piv, self.head_top[None]], axis=0)


def _capsule(p0: np.ndarray, p1: np.ndarray, radius: float,
             radial: int, cyl_rings: int, cap_rings: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed capsule mesh from p0 to p1: ring lattice plus two pole fans."""
    axis = p1 - p0
    length = float(np.linalg.norm(axis))
    u = axis / length
    # orthonormal frame around the axis
    ref = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(u, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)

    rows = []  # (center_offset_along_axis, ring_radius)
    for i in range(cap_rings, 0, -1):  # bottom cap, pole excluded
        a = (i / (cap_rings + 1)) * (np.pi / 2)
        rows.append((-np.sin(a) * radius, np.cos(a) * radius))
    for i in range(cyl_rings + 1):
        rows.append((length * i / cyl_rings, radius))
    for i in range(1, cap_rings + 1):  # top cap
        a = (i / (cap_rings + 1)) * (np.pi / 2)
        rows.append((length + np.sin(a) * radius, np.cos(a) * radius))

    angles = 2 * np.pi * np.arange(radial) / radial
    circle = np.outer(np.cos(angles), e1) + np.outer(np.sin(angles), e2)

    verts = [p0 - radius * u]  # bottom pole
    for off, r in rows:
        verts.append(p0 + off * u + r * circle)
    verts.append(p1 + radius * u)  # top pole
    vertices = np.concatenate([verts[0][None], *verts[1:-1], verts[-1][None]], axis=0)

    faces = []
    n_rows = len(rows)
    top_pole = 1 + n_rows * radial
    for k in range(radial):  # bottom fan
        faces.append([0, 1 + (k + 1) % radial, 1 + k])
    for row in range(n_rows - 1):
        base0 = 1 + row * radial
        base1 = base0 + radial
        for k in range(radial):
            k1 = (k + 1) % radial
            faces.append([base0 + k, base0 + k1, base1 + k])
            faces.append([base0 + k1, base1 + k1, base1 + k])
    base = 1 + (n_rows - 1) * radial
    for k in range(radial):  # top fan
        faces.append([base + k, base + (k + 1) % radial, top_pole])
    return vertices, np.asarray(faces, dtype=np.int64)


def build_actor(height: float = 1.75,
                proportions: BodyProportions = BodyProportions(),
                seed: int = 0) -> ActorModel:
    """Deterministic labeled capsule actor of the given height.

    ``seed`` perturbs limb radii slightly (+-6%) so a population of
    actors is not byte-identical; the same (height, proportions, seed)
    always rebuilds the same mesh.
    """
    if height <= 0:
        raise ValueError(f"height must be positive, got {height}")
    p = proportions
    h = height
    rng = np.random.default_rng(seed)
    jitter = {k: float(rng.uniform(0.94, 1.06)) for k in
              ("torso", "head", "arm", "upper_leg", "lower_leg", "pelvis")}

    hipz, waistz = p.hip_height * h, p.waist_height * h
    shz, neckz = p.shoulder_height * h, p.neck_height * h
    hw, sw = p.hip_halfwidth * h, p.shoulder_halfwidth * h
    kneez, anklez, wristz = p.knee_height * h, p.ankle_height * h, p.wrist_height * h

    # (name, label, parent, pivot, capsule p0, capsule p1, radius)
    defs = [
        ("low_body", LOW_BODY, -1, [0, 0, hipz], [0, 0, hipz - 0.045 * h], [0, 0, waistz],
         p.pelvis_radius * h * jitter["pelvis"]),
        ("up_body", UP_BODY, 0, [0, 0, waistz], [0, 0, waistz], [0, 0, shz + 0.01 * h],
         p.torso_radius * h * jitter["torso"]),
        ("head", HEAD, 1, [0, 0, neckz], [0, 0, neckz + 0.03 * h], [0, 0, 0.94 * h],
         p.head_radius * h * jitter["head"]),
        ("left_arm", LEFT_ARM, 1, [0, sw, shz], [0, sw, shz - 0.02 * h], [0, sw, wristz],
         p.arm_radius * h * jitter["arm"]),
        ("right_arm", RIGHT_ARM, 1, [0, -sw, shz], [0, -sw, shz - 0.02 * h], [0, -sw, wristz],
         p.arm_radius * h * jitter["arm"]),
        ("upleft_leg", UPLEFT_LEG, 0, [0, hw, hipz - 0.02 * h], [0, hw, hipz - 0.03 * h],
         [0, hw, kneez + 0.01 * h], p.upper_leg_radius * h * jitter["upper_leg"]),
        ("upright_leg", UPRIGHT_LEG, 0, [0, -hw, hipz - 0.02 * h], [0, -hw, hipz - 0.03 * h],
         [0, -hw, kneez + 0.01 * h], p.upper_leg_radius * h * jitter["upper_leg"]),
        ("lowleft_leg", LOWLEFT_LEG, 5, [0, hw, kneez], [0, hw, kneez - 0.01 * h],
         [0, hw, anklez], p.lower_leg_radius * h * jitter["lower_leg"]),
        ("lowright_leg", LOWRIGHT_LEG, 6, [0, -hw, kneez], [0, -hw, kneez - 0.01 * h],
         [0, -hw, anklez], p.lower_leg_radius * h * jitter["lower_leg"]),
    ]

    segments = []
    all_verts, all_faces, v_part, v_seg = [], [], [], []
    offset = 0
    for seg_idx, (name, label, parent, pivot, c0, c1, radius) in enumerate(defs):
        segments.append(Segment(name=name, label=label, parent=parent,
                                pivot=np.asarray(pivot, dtype=np.float64)))
        verts, faces = _capsule(np.asarray(c0, float), np.asarray(c1, float), radius,
                                p.radial_segments, p.cylinder_rings, p.cap_rings)
        all_verts.append(verts)
        all_faces.append(faces + offset)
        v_part.append(np.full(len(verts), label, dtype=np.int16))
        v_seg.append(np.full(len(verts), seg_idx, dtype=np.int16))
        offset += len(verts)

    return ActorModel(
        segments=segments,
        vertices=np.concatenate(all_verts),
        faces=np.concatenate(all_faces),
        vertex_part=np.concatenate(v_part),
        vertex_segment=np.concatenate(v_seg),
        height=h,
        head_top=np.array([0.0, 0.0, h]),
    )
