"""Motion synthesis: closed-form joint oscillations + forward kinematics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .actor import ActorModel

MOTION_CLASSES = ("walk", "wave", "squat", "idle", "turn")

# segment indices in build order
LOW_BODY_S, UP_BODY_S, HEAD_S, LEFT_ARM_S, RIGHT_ARM_S = 0, 1, 2, 3, 4
UPLEFT_LEG_S, UPRIGHT_LEG_S, LOWLEFT_LEG_S, LOWRIGHT_LEG_S = 5, 6, 7, 8


@dataclass
class MotionSpec:
    motion_class: str
    amplitude: float = 0.6
    frequency: float = 1.0  # Hz
    phase: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))  # m/frame
    seed: int = 0

    def __post_init__(self):
        if self.motion_class not in MOTION_CLASSES:
            raise ValueError(f"unknown motion class {self.motion_class!r}")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        self.velocity = np.asarray(self.velocity, dtype=np.float64)


@dataclass
class MeshSequence:
    """Posed frames of one actor; vertex indexing is frame-invariant."""

    actor: ActorModel
    vertices: np.ndarray  # (L, V, 3)
    joints: np.ndarray    # (L, 10, 3)

    def __len__(self) -> int:
        return len(self.vertices)

    def frame_triangles(self, t: int) -> np.ndarray:
        return self.vertices[t][self.actor.faces]


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _joint_angles(spec: MotionSpec, theta: float, height: float):
    """Per-segment local rotations plus a root height offset for frame phase ``theta``."""
    a = spec.amplitude
    rots: dict[int, np.ndarray] = {}
    dz = 0.0
    cls = spec.motion_class
    if cls == "walk":
        swing = a * np.sin(theta)
        rots[UPLEFT_LEG_S] = _ry(swing)
        rots[UPRIGHT_LEG_S] = _ry(-swing)
        rots[LOWLEFT_LEG_S] = _ry(-0.5 * a * (1 + np.cos(theta)) * 0.5)
        rots[LOWRIGHT_LEG_S] = _ry(-0.5 * a * (1 - np.cos(theta)) * 0.5)
        rots[LEFT_ARM_S] = _ry(-0.55 * swing)
        rots[RIGHT_ARM_S] = _ry(0.55 * swing)
    elif cls == "wave":
        rots[RIGHT_ARM_S] = _rx(2.45 + 0.35 * a * np.sin(2 * theta))
        rots[LEFT_ARM_S] = _ry(0.1 * a * np.sin(theta))
        rots[HEAD_S] = _rz(0.15 * a * np.sin(theta))
    elif cls == "squat":
        bend = 0.5 * (1 - np.cos(theta))  # 0..1
        rots[UPLEFT_LEG_S] = _ry(1.1 * a * bend)
        rots[UPRIGHT_LEG_S] = _ry(1.1 * a * bend)
        rots[LOWLEFT_LEG_S] = _ry(-2.0 * a * bend)
        rots[LOWRIGHT_LEG_S] = _ry(-2.0 * a * bend)
        rots[UP_BODY_S] = _ry(0.35 * a * bend)
        rots[LEFT_ARM_S] = _ry(-1.2 * a * bend)
        rots[RIGHT_ARM_S] = _ry(-1.2 * a * bend)
        dz = -0.22 * height * a * bend
    elif cls == "turn":
        rots[LOW_BODY_S] = _rz(1.2 * a * np.sin(theta))
        rots[LEFT_ARM_S] = _ry(-0.2 * a * np.sin(theta))
        rots[RIGHT_ARM_S] = _ry(0.2 * a * np.sin(theta))
    # idle: everything stays at bind pose
    return rots, dz


def animate(actor: ActorModel, spec: MotionSpec, n_frames: int,
            frame_rate: float = 10.0) -> MeshSequence:
    """Pose the actor over ``n_frames``.

    The root advances exactly ``spec.velocity`` per frame; a heading yaw
    (derived from the velocity for locomotion, from the spec seed
    otherwise) orients the whole body.
    """
    if n_frames < 1:
        raise ValueError("need at least one frame")
    speed = float(np.linalg.norm(spec.velocity[:2]))
    if speed > 1e-9:
        heading = float(np.arctan2(spec.velocity[1], spec.velocity[0]))
    else:
        heading = float(np.random.default_rng(spec.seed).uniform(0, 2 * np.pi))
    heading_R = _rz(heading)

    n_seg = len(actor.segments)
    pivots = [s.pivot for s in actor.segments]
    parents = [s.parent for s in actor.segments]
    root_pivot = pivots[0]

    all_verts = np.empty((n_frames, actor.n_vertices, 3))
    all_joints = np.empty((n_frames, 10, 3))
    for t in range(n_frames):
        theta = 2 * np.pi * spec.frequency * (t / frame_rate) + spec.phase
        rots, dz = _joint_angles(spec, theta, actor.height)
        shift = spec.velocity * t + np.array([0.0, 0.0, dz])

        world_R = [None] * n_seg
        world_p = [None] * n_seg
        for s in range(n_seg):
            local = rots.get(s, np.eye(3))
            if parents[s] < 0:
                world_R[s] = heading_R @ local
                world_p[s] = root_pivot + shift
            else:
                p = parents[s]
                world_R[s] = world_R[p] @ local
                world_p[s] = world_R[p] @ (pivots[s] - pivots[p]) + world_p[p]

        for s in range(n_seg):
            mask = actor.vertex_segment == s
            local_v = actor.vertices[mask] - pivots[s]
            all_verts[t, mask] = local_v @ world_R[s].T + world_p[s]
        all_joints[t, :9] = np.stack(world_p)
        head_local = actor.head_top - pivots[HEAD_S]
        all_joints[t, 9] = world_R[HEAD_S] @ head_local + world_p[HEAD_S]

    return MeshSequence(actor=actor, vertices=all_verts, joints=all_joints)


def sample_motion_spec(motion_class: str, rng: np.random.Generator) -> MotionSpec:
    """Randomized-but-seeded motion parameters for dataset generation."""
    amplitude = float(rng.uniform(0.45, 0.8))
    frequency = float(rng.uniform(0.7, 1.3))
    phase = float(rng.uniform(0, 2 * np.pi))
    seed = int(rng.integers(0, 2**31 - 1))
    if motion_class == "walk":
        speed = float(rng.uniform(0.025, 0.055))
        heading = float(rng.uniform(0, 2 * np.pi))
        velocity = speed * np.array([np.cos(heading), np.sin(heading), 0.0])
    else:
        velocity = np.zeros(3)
    return MotionSpec(motion_class=motion_class, amplitude=amplitude,
                      frequency=frequency, phase=phase, velocity=velocity, seed=seed)
