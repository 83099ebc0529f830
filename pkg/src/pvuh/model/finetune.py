"""Hierarchical-feature fine-tuning model.

Per frame, eleven tokens enter the pre-trained ST encoder: nine part
tokens (geometry fused with motion flow), one global token from the
whole frame cloud, and one learned class token. The decoder is gone;
task heads read the normalized encoder output.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import tensornet as tn
from ..errors import CheckpointError
from ..tensornet import Tensor
from .config import ModelConfig
from .groups import TokenGroups, run_grouped
from .layers import Block, LayerNorm, Mlp2
from .posenc import PositionalEncoders
from .tokenizer import MiniPointNet, fused_tokens

# names shared with the pretraining stage (and loadable from its checkpoints)
PRETRAINED_PREFIXES = ("part_tok.", "pos.", "enc.", "enc_norm.")


@dataclass
class FinetuneBatch:
    """Token-level arrays: parts ordered (sample, frame, part), then the
    per-frame global and class tracks ordered (sample, frame)."""

    n_samples: int
    n_frames: int
    n_parts: int

    part_centered: np.ndarray    # (B*L*M, N', 3)
    part_flow: Optional[np.ndarray]
    part_centers: np.ndarray
    part_frames: np.ndarray
    part_samples: np.ndarray

    global_centered: np.ndarray  # (B*L, N, 3)
    global_centers: np.ndarray
    global_frames: np.ndarray
    global_samples: np.ndarray

    spatial_groups: TokenGroups
    temporal_groups: TokenGroups


def collate_finetune(tensors: list, cfg: ModelConfig) -> FinetuneBatch:
    """Stack PatchTensors (with flow) into one fine-tuning batch."""
    B, L, M = len(tensors), cfg.n_frames, cfg.n_parts
    for pt in tensors:
        if (pt.n_frames, pt.n_parts) != (L, M):
            raise ValueError(f"patch tensor is {pt.n_frames}x{pt.n_parts}, "
                             f"config wants {L}x{M}")

    part_centered = np.concatenate([
        (pt.patches - pt.centers[:, :, None, :]).reshape(L * M, -1, 3)
        for pt in tensors])
    have_flow = all(pt.flow_patches is not None for pt in tensors)
    part_flow = np.concatenate([
        pt.flow_patches.reshape(L * M, -1, 3) for pt in tensors]) if have_flow else None
    part_centers = np.concatenate([pt.centers.reshape(L * M, 3) for pt in tensors])
    part_frames = np.tile(np.repeat(np.arange(L), M), B)
    part_samples = np.repeat(np.arange(B), L * M)

    global_centered = np.concatenate([
        pt.frame_points - pt.frame_centroids[:, None, :] for pt in tensors])
    global_centers = np.concatenate([pt.frame_centroids for pt in tensors])
    global_frames = np.tile(np.arange(L), B)
    global_samples = np.repeat(np.arange(B), L)

    # token order: parts, then global rows, then class rows
    extra_frames = np.concatenate([global_frames, global_frames])
    extra_samples = np.concatenate([global_samples, global_samples])
    sp_ids = np.concatenate([part_samples * L + part_frames,
                             extra_samples * L + extra_frames])
    part_tracks = np.tile(np.arange(M), B * L)
    tracks = np.concatenate([part_tracks,
                             np.full(B * L, M),        # global track
                             np.full(B * L, M + 1)])   # class track
    tmp_samples = np.concatenate([part_samples, extra_samples])
    tp_ids = tmp_samples * (M + 2) + tracks

    return FinetuneBatch(
        n_samples=B, n_frames=L, n_parts=M,
        part_centered=part_centered, part_flow=part_flow,
        part_centers=part_centers, part_frames=part_frames,
        part_samples=part_samples,
        global_centered=global_centered, global_centers=global_centers,
        global_frames=global_frames, global_samples=global_samples,
        spatial_groups=TokenGroups(sp_ids), temporal_groups=TokenGroups(tp_ids),
    )


class FinetuneModel:
    """Pretrained tokenizer/PE/encoder plus flow branch, global and class
    tokens, and a task head."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        c = cfg.token_dim
        d1, d2 = cfg.tokenizer_dims
        self.part_tok = MiniPointNet(cfg.point_dim, d1, d2, c, rng, dtype)
        self.pos = PositionalEncoders(c, cfg.pe_hidden, rng, dtype)
        self.encoder = [Block(c, cfg.n_heads, cfg.mlp_ratio, rng, dtype)
                        for _ in cfg.encoder_layout]
        self.enc_norm = LayerNorm(c, dtype)
        # flow branch output is zero-initialized: fine-tuning starts at the
        # exact pretrained function regardless of the flow input
        self.flow_tok = MiniPointNet(cfg.flow_dim, d1, d2, c, rng, dtype,
                                     zero_out=True)
        self.global_tok = MiniPointNet(cfg.point_dim, d1, d2, c, rng, dtype)
        self.class_token = Tensor(rng.normal(0, 0.02, size=(1, c)),
                                  requires_grad=True, dtype=dtype)
        if cfg.head == "action":
            self.head = Mlp2(c, c, cfg.n_classes, rng, dtype)
        else:
            self.head = Mlp2((cfg.n_parts + 1) * c, 2 * c,
                             cfg.n_joints * 3, rng, dtype)
        self.params = self._collect()

    def _collect(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.part_tok.named_params("part_tok"))
        out.update(self.pos.named_params("pos"))
        for i, blk in enumerate(self.encoder):
            out.update(blk.named_params(f"enc.{i}"))
        out.update(self.enc_norm.named_params("enc_norm"))
        out.update(self.flow_tok.named_params("flow_tok"))
        out.update(self.global_tok.named_params("global_tok"))
        out["class_token"] = self.class_token
        out.update(self.head.named_params("head"))
        return out

    def load_pretrained(self, weights: dict[str, np.ndarray]) -> None:
        """Copy tokenizer/PE/encoder weights from a pretraining checkpoint."""
        mismatched, missing = [], []
        for name, p in self.params.items():
            if not name.startswith(PRETRAINED_PREFIXES):
                continue
            if name not in weights:
                missing.append(name)
                continue
            w = np.asarray(weights[name])
            if w.shape != p.data.shape:
                mismatched.append(f"{name}: checkpoint {w.shape} vs model {p.data.shape}")
            else:
                p.data[...] = w.astype(p.data.dtype)
        if mismatched or missing:
            raise CheckpointError(
                "incompatible checkpoint; mismatched shapes: "
                f"{mismatched or 'none'}; missing: {missing or 'none'}")

    def forward(self, batch: FinetuneBatch) -> Tensor:
        """Logits (B, K) for the action head, joints (B, L, J, 3) for pose."""
        if batch.part_flow is None:
            raise ValueError("fine-tuning requires a flow channel "
                             "(ground truth, baseline, or zeros)")
        cfg = self.cfg
        B, L, M = batch.n_samples, batch.n_frames, batch.n_parts
        c = cfg.token_dim

        part_tokens = fused_tokens(
            self.part_tok, self.flow_tok,
            Tensor(batch.part_centered, dtype=self.dtype),
            Tensor(batch.part_flow, dtype=self.dtype))
        global_tokens = self.global_tok(Tensor(batch.global_centered, dtype=self.dtype))
        class_rows = tn.index_select(self.class_token,
                                     np.zeros(B * L, dtype=np.int64))
        x = tn.concat([part_tokens, global_tokens, class_rows], axis=0)

        pe_s = tn.concat([
            self.pos.spatial_pe(batch.part_centers),
            self.pos.spatial_pe(batch.global_centers),
            Tensor(np.zeros((B * L, c)), dtype=self.dtype),  # class: no geometry
        ], axis=0)
        frames = np.concatenate([batch.part_frames, batch.global_frames,
                                 batch.global_frames])
        pe = tn.add(pe_s, self.pos.temporal_pe(frames))

        biases = {
            "s": batch.spatial_groups.bias_tensor(self.dtype),
            "t": batch.temporal_groups.bias_tensor(self.dtype),
        }
        for blk, kind in zip(self.encoder, cfg.encoder_layout):
            groups = batch.spatial_groups if kind == "s" else batch.temporal_groups
            x = tn.add(x, pe)
            x = run_grouped(x, groups, blk, biases[kind])
        x = self.enc_norm(x)

        n_part = B * L * M
        if cfg.head == "action":
            class_out = tn.slice_axis(x, 0, n_part + B * L, n_part + 2 * B * L)
            pooled = tn.mean_axis(tn.reshape(class_out, (B, L, c)), axis=1)
            return self.head(pooled)  # (B, K)
        part_out = tn.reshape(tn.slice_axis(x, 0, 0, n_part), (B * L, M * c))
        glob_out = tn.slice_axis(x, 0, n_part, n_part + B * L)
        per_frame = tn.concat([part_out, glob_out], axis=1)  # (B*L, (M+1)*C)
        joints = tn.reshape(self.head(per_frame), (B, L, cfg.n_joints, 3))
        root = tn.slice_axis(joints, 2, cfg.root_joint, cfg.root_joint + 1)
        return tn.sub(joints, root)
