"""Synthetic labeled LiDAR human sequences: actor, motion, scan, flow."""

from .actor import ActorModel, BodyProportions, Segment, build_actor
from .motion import MeshSequence, MotionSpec, animate, sample_motion_spec
from .lidar import LidarConfig, simulate_lidar
from .augment import add_noise_objects, crop_occlusion
from .labels import PART_NAMES, heuristic_part_labeler, map24to9
from .flow import FlowField, flow_ground_truth, nn_flow_baseline
from .generate import GenParams, make_sequence, make_mesh_sequence

__all__ = [
    "ActorModel", "BodyProportions", "Segment", "build_actor",
    "MeshSequence", "MotionSpec", "animate", "sample_motion_spec",
    "LidarConfig", "simulate_lidar",
    "add_noise_objects", "crop_occlusion",
    "PART_NAMES", "heuristic_part_labeler", "map24to9",
    "FlowField", "flow_ground_truth", "nn_flow_baseline",
    "GenParams", "make_sequence", "make_mesh_sequence",
]
