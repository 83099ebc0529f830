"""Model hyperparameters and their canonical digest."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields


def parse_layout(text: str) -> tuple[str, ...]:
    """Expand a compact layout like ``"s4,t4,s4"`` to per-layer kinds."""
    layers: list[str] = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        kind, count = piece[0], piece[1:] or "1"
        if kind not in ("s", "t") or not count.isdigit():
            raise ValueError(f"bad layout element {piece!r} (want e.g. 's4' or 't2')")
        layers.extend(kind * int(count))
    if not layers:
        raise ValueError("layout must contain at least one layer")
    return tuple(layers)


def format_layout(layout: tuple[str, ...]) -> str:
    out = []
    for kind in layout:
        if out and out[-1][0] == kind:
            out[-1] = (kind, out[-1][1] + 1)
        else:
            out.append((kind, 1))
    return ",".join(f"{k}{n}" for k, n in out)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture constants; defaults follow the full-scale recipe."""

    token_dim: int = 384                 # C
    n_heads: int = 6
    encoder_layout: tuple[str, ...] = parse_layout("s4,t4,s4")
    decoder_layout: tuple[str, ...] = parse_layout("s4")
    mlp_ratio: int = 4
    n_frames: int = 30                   # L
    n_parts: int = 9                     # M
    n_patch_points: int = 48             # N'
    point_dim: int = 3                   # D
    flow_dim: int = 3                    # D'
    tokenizer_dims: tuple[int, int] = (64, 128)
    pe_hidden: int = 128
    head: str = "action"                 # or "pose"
    n_classes: int = 12                  # K
    n_joints: int = 10                   # J
    root_joint: int = 0

    def __post_init__(self):
        if self.token_dim % self.n_heads:
            raise ValueError(
                f"token_dim {self.token_dim} not divisible by heads {self.n_heads}")
        if self.head not in ("action", "pose"):
            raise ValueError(f"unknown head {self.head!r}")
        if not self.encoder_layout or not self.decoder_layout:
            raise ValueError("layouts must be non-empty")

    def digest(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple) and v and isinstance(v[0], str):
                v = format_layout(v)
            lines.append(f"{f.name}={v}")
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()


MICRO_CONFIG = ModelConfig(
    token_dim=16, n_heads=2, encoder_layout=parse_layout("s1,t1"),
    decoder_layout=parse_layout("s1"), n_frames=2, n_parts=2,
    n_patch_points=4, tokenizer_dims=(4, 6), pe_hidden=8,
    n_classes=3, n_joints=4,
)
