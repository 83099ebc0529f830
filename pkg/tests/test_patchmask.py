import numpy as np
import pytest

from pvuh.geom import PointCloudFrame, PointSequence
from pvuh.patchmask import (
    MaskPlan,
    apply_mask,
    build_patch_tensor,
    group_by_part,
    plan_mask,
    round_half_up,
)
from pvuh.synthgen import GenParams, make_sequence


def _labeled_frame(n_per_part, noise=0, seed=0):
    rng = np.random.default_rng(seed)
    pts, labels = [], []
    for p, cnt in enumerate(n_per_part):
        pts.append(rng.normal(size=(cnt, 3)) + p)
        labels.append(np.full(cnt, p))
    if noise:
        pts.append(rng.normal(size=(noise, 3)))
        labels.append(np.full(noise, 9))
    return PointCloudFrame(points=np.concatenate(pts),
                           part_labels=np.concatenate(labels).astype(np.int16))


class TestGroupByPart:
    def test_noise_dropped(self):
        f = _labeled_frame([0] * 9, noise=20)
        groups = group_by_part(f)
        assert len(groups) == 9
        assert all(len(g) == 0 for g in groups)

    def test_partition(self):
        f = _labeled_frame([5, 3, 7, 2, 4, 6, 1, 8, 9], noise=11)
        groups = group_by_part(f)
        assert sum(len(g) for g in groups) == f.n_points - 11
        for p, g in enumerate(groups):
            assert (f.part_labels[g] == p).all()

    def test_keying_under_permutation(self):
        f = _labeled_frame([4, 4, 4, 4, 4, 4, 4, 4, 4])
        perm = np.random.default_rng(1).permutation(f.n_points)
        g = f.select(perm)
        for p, (ga, gb) in enumerate(zip(group_by_part(f), group_by_part(g))):
            np.testing.assert_allclose(
                np.sort(f.points[ga], axis=0), np.sort(g.points[gb], axis=0))


def _toy_sequence(counts_per_frame, seed=0):
    frames = [_labeled_frame(c, seed=seed + i) for i, c in enumerate(counts_per_frame)]
    # equalize the frame point counts by trimming
    n = min(f.n_points for f in frames)
    frames = [f.select(np.arange(n)) for f in frames]
    return PointSequence(frames=frames)


class TestBuildPatchTensor:
    def test_large_group_distinct_points(self):
        seq = _toy_sequence([[100] * 9])
        pt = build_patch_tensor(seq, n_patch_points=48, seed=0)
        patch = pt.patches[0, 0]
        assert len(np.unique(np.round(patch, 9), axis=0)) == 48
        assert not pt.absent.any()

    def test_small_group_cycles(self):
        seq = _toy_sequence([[5, 100, 100, 100, 100, 100, 100, 100, 100]])
        pt = build_patch_tensor(seq, n_patch_points=48, seed=0)
        uniq = np.unique(np.round(pt.patches[0, 0], 9), axis=0)
        assert len(uniq) == 5

    def test_empty_group_filled_with_centroid(self):
        seq = _toy_sequence([[0, 50, 50, 50, 50, 50, 50, 50, 50]])
        pt = build_patch_tensor(seq, n_patch_points=16, seed=0)
        assert pt.absent[0, 0]
        centroid = seq.frames[0].points.mean(axis=0)
        np.testing.assert_allclose(pt.patches[0, 0], np.broadcast_to(centroid, (16, 3)))

    def test_centers_are_patch_means(self):
        seq = _toy_sequence([[30] * 9, [25] * 9], seed=3)
        pt = build_patch_tensor(seq, n_patch_points=12, seed=1)
        np.testing.assert_allclose(pt.centers, pt.patches.mean(axis=2), atol=1e-6)

    def test_deterministic(self):
        seq = _toy_sequence([[30] * 9])
        a = build_patch_tensor(seq, seed=7)
        b = build_patch_tensor(seq, seed=7)
        np.testing.assert_array_equal(a.patches, b.patches)

    def test_flow_patches(self):
        seq = make_sequence("walk", master_seed=3, index=0,
                            params=GenParams(n_frames=3, n_points=200))
        pt = build_patch_tensor(seq, with_flow=True, n_patch_points=24, seed=0)
        assert pt.flow_patches.shape == (3, 9, 24, 3)
        # last frame has no valid flow, so its patches are all zero
        np.testing.assert_array_equal(pt.flow_patches[2], 0.0)


class TestPlanMask:
    def test_paper_ratios(self):
        plan = plan_mask(30, 9, 0.8, 0.6, seed=0)
        assert len(plan.masked_frames) == 24
        assert len(plan.visible_frames) == 6
        assert all(len(v) == 5 for v in plan.spatial_masked.values())

    def test_zero_ratios(self):
        plan = plan_mask(30, 9, 0.0, 0.0, seed=0)
        assert plan.masked_frames == ()
        assert all(len(v) == 0 for v in plan.spatial_masked.values())

    def test_round_half_up(self):
        assert round_half_up(5.4) == 5
        assert round_half_up(4.5) == 5
        assert round_half_up(24.0) == 24

    def test_deterministic_and_seed_sensitive(self):
        a = plan_mask(30, 9, 0.8, 0.6, seed=5)
        b = plan_mask(30, 9, 0.8, 0.6, seed=5)
        c = plan_mask(30, 9, 0.8, 0.6, seed=6)
        assert a == b
        assert a != c

    @pytest.mark.parametrize("seed", range(50))
    def test_counts_invariant(self, seed):
        plan = plan_mask(30, 9, 0.8, 0.6, seed=seed)
        assert len(plan.masked_frames) == 24
        assert set(plan.spatial_masked) == set(plan.visible_frames)
        assert all(len(set(v)) == 5 for v in plan.spatial_masked.values())


class TestApplyMask:
    def _pt(self, L=30, seed=0):
        seq = _toy_sequence([[20] * 9 for _ in range(L)], seed=seed)
        return build_patch_tensor(seq, n_patch_points=8, seed=0)

    def test_default_plan_counts(self):
        pt = self._pt()
        m = apply_mask(pt, plan_mask(30, 9, 0.8, 0.6, seed=1))
        assert len(m.visible_slots) == 24
        assert len(m.spatial_slots) == 30
        assert len(m.temporal_slots) == 216
        all_slots = np.concatenate([m.visible_slots, m.spatial_slots, m.temporal_slots])
        assert sorted(all_slots.tolist()) == list(range(270))

    def test_empty_plan(self):
        pt = self._pt(L=4)
        m = apply_mask(pt, plan_mask(4, 9, 0.0, 0.0, seed=0))
        assert len(m.visible_slots) == 36
        assert len(m.spatial_slots) == 0 and len(m.temporal_slots) == 0

    def test_rescatter_bit_exact(self):
        pt = self._pt(L=10, seed=4)
        m = apply_mask(pt, plan_mask(10, 9, 0.8, 0.6, seed=2))
        np.testing.assert_array_equal(m.rescatter(), pt.patches)

    def test_targets_centered(self):
        pt = self._pt(L=10, seed=5)
        m = apply_mask(pt, plan_mask(10, 9, 0.8, 0.6, seed=3))
        np.testing.assert_allclose(m.spatial_targets.mean(axis=1), 0.0, atol=1e-6)
        np.testing.assert_allclose(m.temporal_targets.mean(axis=1), 0.0, atol=1e-6)

    def test_shape_mismatch(self):
        pt = self._pt(L=5)
        with pytest.raises(ValueError, match="plan is"):
            apply_mask(pt, plan_mask(6, 9, 0.5, 0.5, seed=0))

    @pytest.mark.parametrize("seed", range(10))
    def test_partition_property(self, seed):
        pt = self._pt(L=7, seed=seed)
        m = apply_mask(pt, plan_mask(7, 9, 0.4, 0.3, seed=seed))
        slots = np.concatenate([m.visible_slots, m.spatial_slots, m.temporal_slots])
        assert len(slots) == 63
        assert len(np.unique(slots)) == 63
