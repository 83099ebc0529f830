"""End-to-end sequence synthesis: actor -> motion -> scan -> augment ->
sample -> flow ground truth.

Every sequence derives its own RNG stream from (master_seed, index), so
datasets are reproducible and generation parallelizes per sequence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geom import PointSequence, fps
from .actor import BodyProportions, build_actor
from .augment import add_noise_objects, crop_occlusion
from .flow import attach_flow, flow_ground_truth
from .lidar import LidarConfig, simulate_lidar
from .motion import MeshSequence, sample_motion_spec, animate


@dataclass
class GenParams:
    """Knobs for the synthetic dataset generator."""

    n_frames: int = 30
    n_points: int = 384
    frame_rate: float = 10.0
    height_range: tuple[float, float] = (1.55, 1.95)
    distance_range: tuple[float, float] = (3.0, 6.0)
    sensor_z_frac: float = 0.55
    beams: int = 48
    vertical_fov_deg: float = 40.0
    horizontal_res_deg: float = 0.30
    range_sigma: float = 0.008
    dropout: float = 0.02
    max_noise_objects: int = 2
    crop_prob: float = 0.5
    crop_max_fraction: float = 0.22
    flow_threshold: float = 0.10
    with_flow: bool = True
    proportions: BodyProportions = field(default_factory=BodyProportions)


def _rng_for(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed,
                                                        spawn_key=(index,)))


def _setup(motion_class: str, rng: np.random.Generator, params: GenParams):
    """Actor, animation, and sensor placement (shared with flow re-derivation)."""
    height = float(rng.uniform(*params.height_range))
    actor_seed = int(rng.integers(2**31 - 1))
    actor = build_actor(height=height, proportions=params.proportions, seed=actor_seed)
    spec = sample_motion_spec(motion_class, rng)
    mesh = animate(actor, spec, params.n_frames, frame_rate=params.frame_rate)

    distance = float(rng.uniform(*params.distance_range))
    azimuth = float(rng.uniform(0, 2 * np.pi))
    aim = mesh.joints[:, 0, :].mean(axis=0)  # trajectory midpoint of the root
    origin = aim + distance * np.array([np.cos(azimuth), np.sin(azimuth), 0.0])
    origin[2] = params.sensor_z_frac * height
    cfg = LidarConfig(
        sensor_origin=origin,
        beams=params.beams,
        vertical_fov_deg=params.vertical_fov_deg,
        horizontal_res_deg=params.horizontal_res_deg,
        range_sigma=params.range_sigma,
        max_range=60.0,
        dropout=params.dropout,
    )
    lidar_seed = int(rng.integers(2**31 - 1))
    return mesh, cfg, lidar_seed


def make_mesh_sequence(motion_class: str, master_seed: int, index: int,
                       params: GenParams) -> MeshSequence:
    """Re-derive the posed mesh a generated sequence was scanned from."""
    rng = _rng_for(master_seed, index)
    mesh, _, _ = _setup(motion_class, rng, params)
    return mesh


def make_sequence(motion_class: str, master_seed: int, index: int,
                  params: GenParams) -> PointSequence:
    """Generate one labeled sequence with exactly ``n_points`` per frame."""
    rng = _rng_for(master_seed, index)
    mesh, cfg, lidar_seed = _setup(motion_class, rng, params)
    seq = simulate_lidar(mesh, cfg, seed=lidar_seed, frame_rate=params.frame_rate,
                         actor_id=index, motion_class=motion_class)

    for t in range(len(seq)):
        frame = seq.frames[t]
        n_noise = int(rng.integers(0, params.max_noise_objects + 1))
        if n_noise:
            frame = add_noise_objects(frame, n_noise, seed=int(rng.integers(2**31 - 1)))
        if rng.random() < params.crop_prob:
            frac = float(rng.uniform(0.05, params.crop_max_fraction))
            frame = crop_occlusion(frame, frac, seed=int(rng.integers(2**31 - 1)))
        start = int(rng.integers(frame.n_points))
        frame = frame.select(fps(frame.points, params.n_points, start_index=start))
        seq.frames[t] = frame

    if params.with_flow:
        add_flow_ground_truth(seq, mesh, params.flow_threshold)
    return seq


def add_flow_ground_truth(seq: PointSequence, mesh: MeshSequence,
                          threshold: float) -> None:
    """Attach vertex-mediated flow to frames 0..L-2 (last frame invalid)."""
    for t in range(len(seq) - 1):
        field_ = flow_ground_truth(seq.frames[t], seq.frames[t + 1],
                                   mesh.vertices[t], mesh.vertices[t + 1],
                                   threshold=threshold)
        attach_flow(seq.frames[t], field_)
    last = seq.frames[-1]
    last.flow = np.zeros((last.n_points, 3))
    last.flow_valid = np.zeros(last.n_points, dtype=bool)
