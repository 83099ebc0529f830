import numpy as np
import pytest

import pvuh.tensornet as tn
from pvuh.errors import CheckpointError, DataError
from pvuh.model import (
    MICRO_CONFIG,
    FinetuneModel,
    MiniPointNet,
    ModelConfig,
    PositionalEncoders,
    PretrainModel,
    chamfer_loss,
    collate_finetune,
    collate_pretrain,
    count_params,
    fused_tokens,
    parse_layout,
)
from pvuh.patchmask import PatchTensor, apply_mask, plan_mask
from pvuh.tensornet import Tensor

F64 = np.float64


def make_patch_tensor(cfg: ModelConfig, seed=0, n_full=16, with_flow=True):
    rng = np.random.default_rng(seed)
    L, M, NP = cfg.n_frames, cfg.n_parts, cfg.n_patch_points
    patches = rng.normal(size=(L, M, NP, 3)) * 0.3
    frame_points = rng.normal(size=(L, n_full, 3)) * 0.4
    return PatchTensor(
        patches=patches,
        centers=patches.mean(axis=2),
        absent=np.zeros((L, M), dtype=bool),
        flow_patches=rng.normal(size=(L, M, NP, 3)) * 0.05 if with_flow else None,
        frame_points=frame_points,
        frame_centroids=frame_points.mean(axis=1),
    )


class TestConfig:
    def test_parse_layout(self):
        assert parse_layout("s4,t4,s4") == tuple("ssss" + "tttt" + "ssss")
        assert parse_layout("s1") == ("s",)
        with pytest.raises(ValueError):
            parse_layout("x3")

    def test_digest_sensitive(self):
        a = ModelConfig()
        b = ModelConfig(token_dim=192)
        assert a.digest() == ModelConfig().digest()
        assert a.digest() != b.digest()

    def test_heads_divide_dim(self):
        with pytest.raises(ValueError):
            ModelConfig(token_dim=100, n_heads=6)


class TestTokenizer:
    def _tok(self, c=384, dtype=F64):
        rng = np.random.default_rng(0)
        return MiniPointNet(3, 64, 128, c, rng, dtype)

    def test_output_shape_paper_constants(self):
        tok = self._tok()
        x = Tensor(np.random.default_rng(1).normal(size=(6 * 4, 48, 3)), dtype=F64)
        out = tok(x)
        assert out.shape == (24, 384)
        assert out.data.reshape(6, 4, 384).shape == (6, 4, 384)

    def test_permutation_invariance_exact(self):
        tok = self._tok(c=32)
        rng = np.random.default_rng(2)
        x = rng.normal(size=(3, 20, 3))
        perm = rng.permutation(20)
        a = tok(Tensor(x, dtype=F64)).data
        b = tok(Tensor(x[:, perm], dtype=F64)).data
        np.testing.assert_array_equal(a, b)

    def test_flow_in_pretrain_mode_errors(self):
        tok = self._tok(c=16)
        x = Tensor(np.zeros((2, 4, 3)), dtype=F64)
        with pytest.raises(ValueError, match="no flow branch"):
            fused_tokens(tok, None, x, x)

    def test_zero_init_flow_branch_is_identity(self):
        rng = np.random.default_rng(3)
        part = MiniPointNet(3, 8, 12, 16, rng, F64)
        flow = MiniPointNet(3, 8, 12, 16, rng, F64, zero_out=True)
        x = Tensor(rng.normal(size=(5, 6, 3)), dtype=F64)
        f = Tensor(rng.normal(size=(5, 6, 3)), dtype=F64)
        plain = part(x).data
        fused = fused_tokens(part, flow, x, f).data
        np.testing.assert_array_equal(plain, fused)


class TestPosEnc:
    def test_identical_centers_identical_pe(self):
        pos = PositionalEncoders(16, 8, np.random.default_rng(0), F64)
        centers = np.array([[0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [0.5, 0.5, 0.5]])
        pe = pos.spatial_pe(centers).data
        np.testing.assert_array_equal(pe[0], pe[1])
        assert not np.array_equal(pe[0], pe[2])

    def test_shapes(self):
        pos = PositionalEncoders(24, 8, np.random.default_rng(1), F64)
        assert pos.spatial_pe(np.zeros((7, 3))).shape == (7, 24)
        assert pos.temporal_pe(np.arange(5)).shape == (5, 24)

    def test_zero_init_output_layer_gives_zero_pe(self):
        pos = PositionalEncoders(16, 8, np.random.default_rng(2), F64)
        pos.spatial.l2.w.data[...] = 0
        pos.spatial.l2.b.data[...] = 0
        np.testing.assert_array_equal(
            pos.spatial_pe(np.random.default_rng(3).normal(size=(4, 3))).data, 0.0)


def _micro_batch(cfg, seed=0, r_t=0.5, r_s=0.5):
    pt = make_patch_tensor(cfg, seed=seed)
    plan = plan_mask(cfg.n_frames, cfg.n_parts, r_t, r_s, seed=seed)
    return pt, plan, collate_pretrain([apply_mask(pt, plan)], cfg)


class TestPretrainModel:
    def test_forward_shapes_micro(self):
        model = PretrainModel(MICRO_CONFIG, seed=0, dtype=F64)
        _, plan, batch = _micro_batch(MICRO_CONFIG)
        out = model.forward(batch)
        assert out.loss.size == 1
        assert out.spatial_pred.shape == (batch.n_spatial, 4, 3)
        assert out.temporal_pred.shape == (batch.n_temporal, 4, 3)
        assert out.encoded.shape == (batch.n_visible, MICRO_CONFIG.token_dim)

    def test_default_config_shape_arithmetic(self):
        cfg = ModelConfig()
        pt = make_patch_tensor(cfg, n_full=8)
        plan = plan_mask(30, 9, 0.8, 0.6, seed=1)
        batch = collate_pretrain([apply_mask(pt, plan)], cfg)
        assert batch.n_visible == 24
        assert batch.n_spatial == 30 and batch.n_temporal == 216
        model = PretrainModel(cfg, seed=0, dtype=np.float32)
        out = model.forward(batch)
        # (1-r_t)L x r_sM x N' x D and r_tL x M x N' x D views
        assert out.spatial_pred.data.reshape(6, 5, 48, 3).shape == (6, 5, 48, 3)
        assert out.temporal_pred.data.reshape(24, 9, 48, 3).shape == (24, 9, 48, 3)

    def test_empty_plan_raises(self):
        cfg = MICRO_CONFIG
        pt = make_patch_tensor(cfg)
        plan = plan_mask(cfg.n_frames, cfg.n_parts, 0.0, 0.0, seed=0)
        batch = collate_pretrain([apply_mask(pt, plan)], cfg)
        with pytest.raises(DataError, match="no masked slots"):
            PretrainModel(cfg, dtype=F64).forward(batch)

    def test_spatial_only_plan(self):
        cfg = MICRO_CONFIG
        pt = make_patch_tensor(cfg)
        plan = plan_mask(cfg.n_frames, cfg.n_parts, 0.0, 0.5, seed=0)
        batch = collate_pretrain([apply_mask(pt, plan)], cfg)
        out = PretrainModel(cfg, dtype=F64).forward(batch)
        assert out.temporal_pred is None
        assert out.spatial_pred.shape[0] == batch.n_spatial

    def test_decoder_smaller_than_encoder(self):
        model = PretrainModel(ModelConfig(), seed=0)
        enc = sum(p.data.size for n, p in model.params.items() if n.startswith("enc."))
        dec = sum(p.data.size for n, p in model.params.items() if n.startswith("dec."))
        assert dec < enc

    def test_leakage_masked_coordinates_zero_grad(self):
        cfg = MICRO_CONFIG
        pt, plan, batch = _micro_batch(cfg, seed=4)
        model = PretrainModel(cfg, seed=1, dtype=F64)
        L, M, NP = cfg.n_frames, cfg.n_parts, cfg.n_patch_points
        leaf = Tensor(pt.patches.reshape(L * M, NP, 3), requires_grad=True, dtype=F64)
        out = model.forward(batch, patches_leaf=leaf)
        tn.backward(out.loss)
        g = leaf.grad.reshape(L * M, -1)
        masked = np.concatenate([batch.smask_frames * M + batch.smask_parts,
                                 batch.tmask_frames * M + batch.tmask_parts])
        np.testing.assert_array_equal(g[masked], 0.0)
        vis = batch.vis_flat_slots
        assert np.abs(g[vis]).max() > 0

    def test_deterministic_construction(self):
        a = PretrainModel(MICRO_CONFIG, seed=9, dtype=F64)
        b = PretrainModel(MICRO_CONFIG, seed=9, dtype=F64)
        for k in a.params:
            np.testing.assert_array_equal(a.params[k].data, b.params[k].data)


class TestEncoderProperties:
    def test_frame_permutation_equivariance_without_temporal_pe(self):
        cfg = ModelConfig(token_dim=16, n_heads=2,
                          encoder_layout=parse_layout("s1,t1,s1"),
                          decoder_layout=parse_layout("s1"),
                          n_frames=4, n_parts=3, n_patch_points=5,
                          tokenizer_dims=(4, 6), pe_hidden=8)
        model = PretrainModel(cfg, seed=2, dtype=F64)
        # kill temporal information entirely
        model.pos.temporal.l2.w.data[...] = 0
        model.pos.temporal.l2.b.data[...] = 0

        pt = make_patch_tensor(cfg, seed=5)
        plan = plan_mask(cfg.n_frames, cfg.n_parts, 0.0, 0.0, seed=0)
        batch = collate_pretrain([apply_mask(pt, plan)], cfg)
        base = model.encode_visible(batch).data

        perm = np.array([2, 0, 3, 1])
        pt2 = PatchTensor(patches=pt.patches[perm], centers=pt.centers[perm],
                          absent=pt.absent[perm], flow_patches=None,
                          frame_points=pt.frame_points[perm],
                          frame_centroids=pt.frame_centroids[perm])
        batch2 = collate_pretrain([apply_mask(pt2, plan)], cfg)
        permuted = model.encode_visible(batch2).data
        # token order is frame-major: frame f of the permuted run equals
        # frame perm[f] of the base run
        M = cfg.n_parts
        for f in range(4):
            np.testing.assert_allclose(permuted[f * M:(f + 1) * M],
                                       base[perm[f] * M:(perm[f] + 1) * M],
                                       atol=1e-10)

    def test_temporal_tracks_span_visible_frames(self):
        cfg = ModelConfig()
        pt = make_patch_tensor(cfg, n_full=8)
        plan = plan_mask(30, 9, 0.8, 0.6, seed=3)
        batch = collate_pretrain([apply_mask(pt, plan)], cfg)
        groups = batch.enc_temporal
        assert groups.width <= 6  # at most the visible-frame count
        assert groups.n_tokens == 24

    def test_single_token_group_runs(self):
        cfg = ModelConfig(token_dim=8, n_heads=2, encoder_layout=("s",),
                          decoder_layout=("s",), n_frames=1, n_parts=2,
                          n_patch_points=3, tokenizer_dims=(4, 4), pe_hidden=4)
        model = PretrainModel(cfg, seed=0, dtype=F64)
        pt = make_patch_tensor(cfg, seed=1)
        plan = plan_mask(1, 2, 0.0, 0.4, seed=0)  # one visible part, one masked
        batch = collate_pretrain([apply_mask(pt, plan)], cfg)
        assert batch.n_visible == 1
        out = model.forward(batch)
        assert np.isfinite(out.loss.data)


class TestChamferLoss:
    def test_equal_sets_zero(self):
        rng = np.random.default_rng(0)
        t = rng.normal(size=(4, 6, 3))
        pred = Tensor(t.copy(), dtype=F64)
        assert chamfer_loss(pred, t, F64).data == 0.0

    def test_translated_patch_value(self):
        t = np.zeros((1, 5, 3))
        pred = Tensor(t + np.array([1.0, 0, 0]), dtype=F64)
        assert chamfer_loss(pred, t, F64).data == pytest.approx(2.0)

    def test_permutation_invariant_within_patch(self):
        rng = np.random.default_rng(1)
        t = rng.normal(size=(3, 7, 3))
        p = rng.normal(size=(3, 7, 3))
        a = chamfer_loss(Tensor(p, dtype=F64), t, F64).data
        b = chamfer_loss(Tensor(p[:, rng.permutation(7)], dtype=F64), t, F64).data
        assert a == pytest.approx(b, abs=1e-12)


class TestFinetuneModel:
    CFG = ModelConfig(token_dim=16, n_heads=2, encoder_layout=parse_layout("s1,t1"),
                      decoder_layout=("s",), n_frames=3, n_parts=9,
                      n_patch_points=6, tokenizer_dims=(4, 6), pe_hidden=8,
                      n_classes=12, head="action")

    def test_eleven_tokens_per_frame(self):
        batch = collate_finetune([make_patch_tensor(self.CFG, seed=0)], self.CFG)
        assert batch.spatial_groups.uniform
        assert batch.spatial_groups.width == 11

    def test_action_logits_shape(self):
        model = FinetuneModel(self.CFG, seed=0, dtype=F64)
        batch = collate_finetune([make_patch_tensor(self.CFG, seed=1),
                                  make_patch_tensor(self.CFG, seed=2)], self.CFG)
        logits = model.forward(batch)
        assert logits.shape == (2, 12)

    def test_pose_root_relative(self):
        cfg = ModelConfig(**{**self.CFG.__dict__, "head": "pose", "n_joints": 10})
        model = FinetuneModel(cfg, seed=0, dtype=F64)
        batch = collate_finetune([make_patch_tensor(cfg, seed=3)], cfg)
        joints = model.forward(batch)
        assert joints.shape == (1, cfg.n_frames, 10, 3)
        np.testing.assert_array_equal(joints.data[:, :, cfg.root_joint], 0.0)

    def test_missing_flow_errors(self):
        model = FinetuneModel(self.CFG, seed=0, dtype=F64)
        batch = collate_finetune(
            [make_patch_tensor(self.CFG, seed=4, with_flow=False)], self.CFG)
        with pytest.raises(ValueError, match="flow channel"):
            model.forward(batch)

    def test_zero_flow_equals_any_flow_at_init(self):
        model = FinetuneModel(self.CFG, seed=5, dtype=F64)
        pt = make_patch_tensor(self.CFG, seed=6)
        a = model.forward(collate_finetune([pt], self.CFG)).data
        pt2 = PatchTensor(patches=pt.patches, centers=pt.centers, absent=pt.absent,
                          flow_patches=np.zeros_like(pt.flow_patches),
                          frame_points=pt.frame_points,
                          frame_centroids=pt.frame_centroids)
        b = model.forward(collate_finetune([pt2], self.CFG)).data
        np.testing.assert_array_equal(a, b)

    def test_load_pretrained_and_mismatch(self):
        pre = PretrainModel(self.CFG, seed=0, dtype=F64)
        fin = FinetuneModel(self.CFG, seed=99, dtype=F64)
        weights = {k: p.data for k, p in pre.params.items()}
        fin.load_pretrained(weights)
        np.testing.assert_array_equal(fin.params["enc.0.attn.qkv.w"].data,
                                      pre.params["enc.0.attn.qkv.w"].data)

        bad = dict(weights)
        bad["enc.0.attn.qkv.w"] = np.zeros((2, 2))
        with pytest.raises(CheckpointError, match="enc.0.attn.qkv.w"):
            FinetuneModel(self.CFG, seed=1, dtype=F64).load_pretrained(bad)

    def test_class_weights_shape(self):
        model = FinetuneModel(self.CFG, seed=0, dtype=F64)
        assert model.params["head.l2.w"].shape == (16, 12)


class TestCountParams:
    def test_micro_closed_form(self):
        cfg = MICRO_CONFIG
        c, (d1, d2), h = cfg.token_dim, cfg.tokenizer_dims, cfg.pe_hidden

        def tok(d_in):
            return (d_in * d1 + d1) + (d1 * d2 + d2) + \
                (2 * d2 * 2 * d2 + 2 * d2) + (2 * d2 * c + c)

        def mlp2(a, b, o):
            return a * b + b + b * o + o

        pos = mlp2(3, h, c) + mlp2(1, h, c)
        block = 2 * (2 * c) + (c * 3 * c + 3 * c) + (c * c + c) + \
            mlp2(c, cfg.mlp_ratio * c, c)
        pre = tok(3) + pos + c + cfg.n_parts * c + \
            len(cfg.encoder_layout) * block + 2 * c + \
            len(cfg.decoder_layout) * block + 2 * c + \
            (c * cfg.n_patch_points * 3 + cfg.n_patch_points * 3)
        assert count_params(cfg, "pretrain") == pre

        fin = tok(3) + pos + len(cfg.encoder_layout) * block + 2 * c + \
            tok(3) + tok(3) + c + mlp2(c, c, cfg.n_classes)
        assert count_params(cfg, "finetune") == fin

    def test_default_ordering_finetune_below_pretrain(self):
        cfg = ModelConfig()
        pre = count_params(cfg, "pretrain")
        fin = count_params(cfg, "finetune")
        assert fin < pre
        assert pre > 10_000_000  # full-scale model is tens of millions

    def test_doubling_width_quadruples_attention(self):
        small = ModelConfig(token_dim=64, n_heads=2, n_classes=3)
        big = ModelConfig(token_dim=128, n_heads=2, n_classes=3)

        def attn_count(cfg):
            m = PretrainModel(cfg, seed=0)
            return sum(p.data.size for n, p in m.params.items() if ".attn." in n)

        ratio = attn_count(big) / attn_count(small)
        assert 3.5 <= ratio <= 4.5
