"""File formats and configuration: PVUH containers, PVUC checkpoints,
PLY export, manifests, and the run-config document."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .container import read_sequence, write_sequence
from .manifest import Manifest, ManifestEntry, file_digest
from .ply import PART_PALETTE, export_ply, frame_colors
from .runconfig import REGISTRY, RunConfig

__all__ = [
    "Checkpoint", "load_checkpoint", "save_checkpoint",
    "read_sequence", "write_sequence",
    "Manifest", "ManifestEntry", "file_digest",
    "PART_PALETTE", "export_ply", "frame_colors",
    "REGISTRY", "RunConfig",
]
