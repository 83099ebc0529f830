"""Masked part-patch autoencoder: tokenizer, ST encoder, decoder with a
shared mask token, and the Chamfer reconstruction loss.

Only visible patches reach the encoder. The decoder sees every slot:
visible slots carry the encoded tokens, masked slots the shared mask
token. Spatially-masked slots receive their true patch-center spatial
encoding (the decoder must know where to reconstruct); temporally-masked
slots receive a learned per-part embedding instead, so long-range motion
is never leaked.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import tensornet as tn
from ..errors import DataError
from ..tensornet import Tensor
from .config import ModelConfig
from .groups import TokenGroups, run_grouped
from .layers import Block, LayerNorm, Linear
from .posenc import PositionalEncoders
from .tokenizer import MiniPointNet


@dataclass
class PretrainBatch:
    """Flat token-level arrays for a batch of masked samples.

    Rows are ordered [visible | spatial-masked | temporal-masked]; the
    masked groups carry patch-centered reconstruction targets.
    """

    n_samples: int
    n_visible: int

    vis_centered: np.ndarray   # (n_v, N', 3)
    vis_centers: np.ndarray    # (n_v, 3)
    vis_frames: np.ndarray
    vis_parts: np.ndarray
    vis_samples: np.ndarray
    vis_flat_slots: np.ndarray  # index into the stacked (B*L*M) patch array

    smask_centers: np.ndarray
    smask_frames: np.ndarray
    smask_parts: np.ndarray
    smask_samples: np.ndarray
    smask_targets: np.ndarray  # (n_s, N', 3)
    smask_keep: np.ndarray     # (n_s,) not absent

    tmask_frames: np.ndarray
    tmask_parts: np.ndarray
    tmask_samples: np.ndarray
    tmask_targets: np.ndarray
    tmask_keep: np.ndarray

    enc_spatial: Optional[TokenGroups]
    enc_temporal: Optional[TokenGroups]
    dec_spatial: Optional[TokenGroups]
    dec_temporal: Optional[TokenGroups]

    @property
    def n_spatial(self) -> int:
        return len(self.smask_frames)

    @property
    def n_temporal(self) -> int:
        return len(self.tmask_frames)


def collate_pretrain(samples: list, cfg: ModelConfig) -> PretrainBatch:
    """Stack per-sample MaskedPatches into one flat batch."""
    L, M = cfg.n_frames, cfg.n_parts

    def cat(attr):
        return np.concatenate([getattr(s, attr) for s in samples])

    def fp(slots_attr):
        slots = [getattr(s, slots_attr) for s in samples]
        frames = np.concatenate([sl // M for sl in slots])
        parts = np.concatenate([sl % M for sl in slots])
        smp = np.concatenate([np.full(len(sl), i) for i, sl in enumerate(slots)])
        return frames, parts, smp

    vf, vp, vsmp = fp("visible_slots")
    sf, sp_, ssmp = fp("spatial_slots")
    tf, tp_, tsmp = fp("temporal_slots")

    vis_raw = cat("visible_patches")
    vis_centers = cat("visible_centers")
    vis_centered = vis_raw - vis_centers[:, None, :]
    flat_slots = np.concatenate(
        [s.visible_slots + i * L * M for i, s in enumerate(samples)])

    enc_s = TokenGroups(vsmp * L + vf) if "s" in cfg.encoder_layout else None
    enc_t = TokenGroups(vsmp * M + vp) if "t" in cfg.encoder_layout else None
    all_f = np.concatenate([vf, sf, tf])
    all_p = np.concatenate([vp, sp_, tp_])
    all_smp = np.concatenate([vsmp, ssmp, tsmp])
    dec_s = TokenGroups(all_smp * L + all_f) if "s" in cfg.decoder_layout else None
    dec_t = TokenGroups(all_smp * M + all_p) if "t" in cfg.decoder_layout else None

    return PretrainBatch(
        n_samples=len(samples), n_visible=len(vis_raw),
        vis_centered=vis_centered, vis_centers=vis_centers,
        vis_frames=vf, vis_parts=vp, vis_samples=vsmp, vis_flat_slots=flat_slots,
        smask_centers=cat("spatial_centers"), smask_frames=sf, smask_parts=sp_,
        smask_samples=ssmp, smask_targets=cat("spatial_targets"),
        smask_keep=~cat("spatial_absent"),
        tmask_frames=tf, tmask_parts=tp_, tmask_samples=tsmp,
        tmask_targets=cat("temporal_targets"), tmask_keep=~cat("temporal_absent"),
        enc_spatial=enc_s, enc_temporal=enc_t,
        dec_spatial=dec_s, dec_temporal=dec_t,
    )


def chamfer_loss(pred: Tensor, targets: np.ndarray, dtype) -> Tensor:
    """Mean per-patch symmetric squared-chamfer between (n, N', 3) sets."""
    n, np_, _ = pred.shape
    tgt = Tensor(targets.reshape(n, 1, np_, 3), dtype=dtype)
    diff = tn.sub(tn.reshape(pred, (n, np_, 1, 3)), tgt)
    d2 = tn.sum_axis(tn.mul(diff, diff), axis=3)  # (n, N'pred, N'tgt)
    fwd = tn.mean_axis(tn.min_axis(d2, axis=2))
    bwd = tn.mean_axis(tn.min_axis(d2, axis=1))
    return tn.add(fwd, bwd)


@dataclass
class PretrainOutput:
    loss: Tensor
    spatial_pred: Optional[Tensor]   # (n_s, N', 3) patch-centered
    temporal_pred: Optional[Tensor]  # (n_t, N', 3)
    encoded: Tensor                  # (n_v, C) enhanced visible tokens


class PretrainModel:
    """All learnable state of the self-learning stage."""

    def __init__(self, cfg: ModelConfig, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        c = cfg.token_dim
        d1, d2 = cfg.tokenizer_dims
        self.part_tok = MiniPointNet(cfg.point_dim, d1, d2, c, rng, dtype)
        self.pos = PositionalEncoders(c, cfg.pe_hidden, rng, dtype)
        self.mask_token = Tensor(rng.normal(0, 0.02, size=(1, c)),
                                 requires_grad=True, dtype=dtype)
        self.part_embed = Tensor(rng.normal(0, 0.02, size=(cfg.n_parts, c)),
                                 requires_grad=True, dtype=dtype)
        self.encoder = [Block(c, cfg.n_heads, cfg.mlp_ratio, rng, dtype)
                        for _ in cfg.encoder_layout]
        self.enc_norm = LayerNorm(c, dtype)
        self.decoder = [Block(c, cfg.n_heads, cfg.mlp_ratio, rng, dtype)
                        for _ in cfg.decoder_layout]
        self.dec_norm = LayerNorm(c, dtype)
        self.recon = Linear(c, cfg.n_patch_points * cfg.point_dim, rng, dtype)
        self.params = self._collect()

    def _collect(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.part_tok.named_params("part_tok"))
        out.update(self.pos.named_params("pos"))
        out["mask_token"] = self.mask_token
        out["part_embed"] = self.part_embed
        for i, blk in enumerate(self.encoder):
            out.update(blk.named_params(f"enc.{i}"))
        out.update(self.enc_norm.named_params("enc_norm"))
        for i, blk in enumerate(self.decoder):
            out.update(blk.named_params(f"dec.{i}"))
        out.update(self.dec_norm.named_params("dec_norm"))
        out.update(self.recon.named_params("recon"))
        return out

    # -- encoder ----------------------------------------------------------

    def encode_visible(self, batch: PretrainBatch,
                       patches_leaf: Tensor | None = None) -> Tensor:
        """Tokenize and ST-encode the visible patches only.

        ``patches_leaf`` optionally supplies the full stacked patch array
        as a differentiable tensor; masked slots of it are never read,
        which the leakage tests assert through its gradient.
        """
        if patches_leaf is not None:
            raw = tn.index_select(patches_leaf, batch.vis_flat_slots)
            centers = Tensor(batch.vis_centers[:, None, :], dtype=self.dtype)
            x_in = tn.sub(raw, centers)
        else:
            x_in = Tensor(batch.vis_centered, dtype=self.dtype)
        tokens = self.part_tok(x_in)  # (n_v, C)

        pe = tn.add(self.pos.spatial_pe(batch.vis_centers),
                    self.pos.temporal_pe(batch.vis_frames))
        tokens = self._run_stack(tokens, pe, self.encoder, self.cfg.encoder_layout,
                                 batch.enc_spatial, batch.enc_temporal)
        return self.enc_norm(tokens)

    def _run_stack(self, tokens, pe, blocks, layout, sgroups, tgroups):
        biases = {}
        for blk, kind in zip(blocks, layout):
            groups = sgroups if kind == "s" else tgroups
            if id(groups) not in biases:
                biases[id(groups)] = groups.bias_tensor(self.dtype)
            tokens = tn.add(tokens, pe)
            tokens = run_grouped(tokens, groups, blk, biases[id(groups)])
        return tokens

    # -- decoder + loss ---------------------------------------------------

    def forward(self, batch: PretrainBatch,
                patches_leaf: Tensor | None = None) -> PretrainOutput:
        n_v, n_s, n_t = batch.n_visible, batch.n_spatial, batch.n_temporal
        if n_s + n_t == 0:
            raise DataError("mask plan has no masked slots")
        if not (batch.smask_keep.any() or batch.tmask_keep.any()):
            raise DataError("every masked patch is absent; nothing to reconstruct")

        encoded = self.encode_visible(batch, patches_leaf)
        masked_rows = tn.index_select(
            self.mask_token, np.zeros(n_s + n_t, dtype=np.int64))
        x = tn.concat([encoded, masked_rows], axis=0)

        # positional information per decoder slot (see module docstring)
        pe_s = tn.concat([
            self.pos.spatial_pe(np.concatenate([batch.vis_centers,
                                                batch.smask_centers])),
            tn.index_select(self.part_embed, batch.tmask_parts),
        ], axis=0)
        frames = np.concatenate([batch.vis_frames, batch.smask_frames,
                                 batch.tmask_frames])
        pe = tn.add(pe_s, self.pos.temporal_pe(frames))

        x = self._run_stack(x, pe, self.decoder, self.cfg.decoder_layout,
                            batch.dec_spatial, batch.dec_temporal)
        x = self.dec_norm(x)

        np_, d = self.cfg.n_patch_points, self.cfg.point_dim
        spatial_pred = temporal_pred = None
        terms = []
        if n_s:
            rows = tn.slice_axis(x, 0, n_v, n_v + n_s)
            spatial_pred = tn.reshape(self.recon(rows), (n_s, np_, d))
            if batch.smask_keep.any():
                keep = np.where(batch.smask_keep)[0]
                terms.append(chamfer_loss(tn.index_select(spatial_pred, keep),
                                          batch.smask_targets[keep], self.dtype))
        if n_t:
            rows = tn.slice_axis(x, 0, n_v + n_s, n_v + n_s + n_t)
            temporal_pred = tn.reshape(self.recon(rows), (n_t, np_, d))
            if batch.tmask_keep.any():
                keep = np.where(batch.tmask_keep)[0]
                terms.append(chamfer_loss(tn.index_select(temporal_pred, keep),
                                          batch.tmask_targets[keep], self.dtype))
        loss = terms[0] if len(terms) == 1 else tn.add(terms[0], terms[1])
        return PretrainOutput(loss=loss, spatial_pred=spatial_pred,
                              temporal_pred=temporal_pred, encoded=encoded)
