from pathlib import Path

import numpy as np
import pytest

from pvuh.errors import DataError
from pvuh.geom import PointCloudFrame
from pvuh.synthgen import (
    GenParams,
    LidarConfig,
    MotionSpec,
    add_noise_objects,
    animate,
    build_actor,
    crop_occlusion,
    flow_ground_truth,
    heuristic_part_labeler,
    make_mesh_sequence,
    make_sequence,
    map24to9,
    nn_flow_baseline,
    simulate_lidar,
)
from pvuh.synthgen.labels import PART_NAMES, LABEL_24_NAMES
from pvuh.synthgen.lidar import scan_frame

DATA = Path(__file__).parent / "data"


class TestActor:
    def test_default_build(self):
        actor = build_actor()
        assert actor.n_vertices > 500
        assert set(np.unique(actor.vertex_part)) == set(range(9))
        assert actor.faces.max() < actor.n_vertices
        assert actor.joint_pivots().shape == (10, 3)

    def test_deterministic(self):
        a = build_actor(1.8, seed=3)
        b = build_actor(1.8, seed=3)
        np.testing.assert_array_equal(a.vertices, b.vertices)
        np.testing.assert_array_equal(a.faces, b.faces)

    def test_height_scaling(self):
        a = build_actor(1.0, seed=1)
        b = build_actor(2.0, seed=1)
        ha = a.vertices[:, 2].max() - a.vertices[:, 2].min()
        hb = b.vertices[:, 2].max() - b.vertices[:, 2].min()
        assert hb / ha == pytest.approx(2.0, abs=1e-6)

    def test_bad_height(self):
        with pytest.raises(ValueError):
            build_actor(0.0)


class TestAnimate:
    def test_idle_static(self):
        actor = build_actor(seed=0)
        spec = MotionSpec(motion_class="idle", velocity=np.zeros(3))
        seq = animate(actor, spec, 5)
        for t in range(1, 5):
            np.testing.assert_array_equal(seq.vertices[t], seq.vertices[0])
            np.testing.assert_array_equal(seq.joints[t], seq.joints[0])

    def test_walk_root_trajectory(self):
        actor = build_actor(seed=0)
        spec = MotionSpec(motion_class="walk", velocity=np.array([0.05, 0.0, 0.0]))
        seq = animate(actor, spec, 10)
        root = seq.joints[:, 0, :]
        dx = np.diff(root[:, 0])
        np.testing.assert_allclose(dx, 0.05, atol=1e-9)

    def test_vertex_count_and_labels_frame_invariant(self):
        actor = build_actor(seed=2)
        spec = MotionSpec(motion_class="squat")
        seq = animate(actor, spec, 8)
        assert seq.vertices.shape == (8, actor.n_vertices, 3)
        # labels live on the actor and index identically into every frame
        np.testing.assert_array_equal(actor.vertex_part, seq.actor.vertex_part)

    def test_motion_classes_distinct(self):
        actor = build_actor(seed=4)
        frames = {}
        for cls in ("walk", "wave", "squat", "turn"):
            spec = MotionSpec(motion_class=cls, seed=1)
            frames[cls] = animate(actor, spec, 6).vertices[3]
        assert not np.allclose(frames["walk"], frames["wave"])
        assert not np.allclose(frames["squat"], frames["turn"])

    def test_unknown_class(self):
        with pytest.raises(ValueError):
            MotionSpec(motion_class="moonwalk")


def _static_mesh(distance=5.0, height=1.75):
    actor = build_actor(height=height, seed=0)
    spec = MotionSpec(motion_class="idle", velocity=np.zeros(3), seed=0)
    return animate(actor, spec, 1)


class TestLidar:
    def test_basic_scan(self):
        mesh = _static_mesh()
        cfg = LidarConfig(sensor_origin=[5.0, 0.0, 1.0], beams=64,
                          vertical_fov_deg=40, horizontal_res_deg=0.3,
                          range_sigma=0.0, dropout=0.0)
        seq = simulate_lidar(mesh, cfg, seed=0)
        frame = seq.frames[0]
        assert frame.n_points > 200
        assert frame.part_labels.min() >= 0 and frame.part_labels.max() <= 8
        assert frame.vertex_ids.min() >= 0
        # returns are near the mesh surface
        assert np.linalg.norm(frame.points - frame.points.mean(0), axis=1).max() < 2.0

    def test_deterministic(self):
        mesh = _static_mesh()
        cfg = LidarConfig(sensor_origin=[4.0, 1.0, 1.0], beams=32,
                          range_sigma=0.01, dropout=0.05)
        a = simulate_lidar(mesh, cfg, seed=11)
        b = simulate_lidar(mesh, cfg, seed=11)
        np.testing.assert_array_equal(a.frames[0].points, b.frames[0].points)
        np.testing.assert_array_equal(a.frames[0].vertex_ids, b.frames[0].vertex_ids)

    def test_out_of_range_errors(self):
        mesh = _static_mesh()
        cfg = LidarConfig(sensor_origin=[5.0, 0.0, 1.0], max_range=1.0)
        with pytest.raises(DataError, match="out of view"):
            simulate_lidar(mesh, cfg, seed=0)

    def test_doubling_distance_halves_returns(self):
        # narrow vertical FOV so beam coverage saturates at both ranges and
        # the return count scales with angular width only
        actor = build_actor(seed=0)
        spec = MotionSpec(motion_class="walk", velocity=np.array([0.0, 0.01, 0.0]))
        mesh = animate(actor, spec, 20)
        counts = {}
        sphere = {}
        for d in (2.5, 5.0):
            cfg = LidarConfig(sensor_origin=[d, 0.0, 0.9], beams=48,
                              vertical_fov_deg=18, horizontal_res_deg=0.4,
                              range_sigma=0.0, dropout=0.0)
            seq = simulate_lidar(mesh, cfg, seed=0)
            counts[d] = np.mean([f.n_points for f in seq.frames])
            sphere[d] = _sphere_proxy_rays(mesh, cfg)
        ratio = counts[5.0] / counts[2.5]
        assert 0.35 <= ratio <= 0.65
        proxy_ratio = sphere[5.0] / sphere[2.5]
        assert abs(ratio - proxy_ratio) < 0.2


def _sphere_proxy_rays(mesh, cfg):
    """Analytic count of grid rays intersecting the actor's bounding sphere."""
    verts = mesh.vertices[0]
    center = verts.mean(axis=0)
    radius = np.linalg.norm(verts - center, axis=1).max() * 0.7  # effective body radius
    o = np.asarray(cfg.sensor_origin, float)
    res = np.deg2rad(cfg.horizontal_res_deg)
    az = -np.pi + res * np.arange(int(round(2 * np.pi / res)))
    el = np.linspace(-np.deg2rad(cfg.vertical_fov_deg) / 2,
                     np.deg2rad(cfg.vertical_fov_deg) / 2, cfg.beams)
    aa, ee = np.meshgrid(az, el)
    dirs = np.stack([np.cos(ee) * np.cos(aa), np.cos(ee) * np.sin(aa), np.sin(ee)], -1)
    rel = center - o
    t_axis = dirs.reshape(-1, 3) @ rel
    perp2 = (rel @ rel) - t_axis**2
    return int(((t_axis > 0) & (perp2 < radius**2)).sum())


class TestAugment:
    def _frame(self, n=400, seed=0):
        rng = np.random.default_rng(seed)
        return PointCloudFrame(
            points=rng.normal(size=(n, 3)) * 0.3,
            part_labels=rng.integers(0, 9, n).astype(np.int16),
            vertex_ids=np.arange(n, dtype=np.int64),
        )

    def test_noise_zero_count(self):
        f = self._frame()
        g = add_noise_objects(f, 0, seed=1)
        np.testing.assert_array_equal(g.points, f.points)

    def test_noise_clusters_labeled_and_near_body(self):
        f = self._frame()
        g = add_noise_objects(f, 2, seed=2)
        new = g.points[f.n_points:]
        new_labels = g.part_labels[f.n_points:]
        assert 20 <= len(new) <= 80
        assert (new_labels == 9).all()
        assert (g.part_labels[: f.n_points] == f.part_labels).all()
        assert (g.vertex_ids[f.n_points:] == -1).all()
        # cluster centroids stay near some original point
        for blob in np.array_split(new, 2):
            c = blob.mean(axis=0)
            d = np.linalg.norm(f.points - c, axis=1).min()
            assert d < 0.5

    def test_crop_fraction(self):
        f = self._frame(n=1000)
        g = crop_occlusion(f, 0.3, seed=3)
        assert 650 <= g.n_points <= 700

    def test_crop_zero_unchanged(self):
        f = self._frame()
        g = crop_occlusion(f, 0.0, seed=4)
        np.testing.assert_array_equal(g.points, f.points)

    def test_crop_is_halfspace(self):
        from scipy.optimize import linprog

        f = self._frame(n=500, seed=5)
        g = crop_occlusion(f, 0.25, seed=6)
        kept_set = set(map(tuple, np.round(g.points, 9)))
        removed = np.array([p for p in f.points if tuple(np.round(p, 9)) not in kept_set])
        assert len(removed) == f.n_points - g.n_points
        # exact separability: find (w, b) with w.r - b >= 1 and w.k - b <= -1
        a_ub = np.vstack([
            np.hstack([-removed, np.ones((len(removed), 1))]),
            np.hstack([g.points, -np.ones((g.n_points, 1))]),
        ])
        b_ub = -np.ones(len(a_ub))
        res = linprog(c=np.zeros(4), A_ub=a_ub, b_ub=b_ub,
                      bounds=[(None, None)] * 4, method="highs")
        assert res.success, "removed set is not a half-space split"

    def test_crop_deterministic(self):
        f = self._frame()
        a = crop_occlusion(f, 0.2, seed=7)
        b = crop_occlusion(f, 0.2, seed=7)
        np.testing.assert_array_equal(a.points, b.points)


class TestMap24:
    def test_range_and_surjective(self):
        out = [map24to9(i) for i in range(24)]
        assert all(0 <= v <= 8 for v in out)
        assert set(out) == set(range(9))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            map24to9(24)
        with pytest.raises(ValueError):
            map24to9(-1)

    def test_hand_maps_to_arm(self):
        assert PART_NAMES[map24to9(LABEL_24_NAMES.index("left_hand"))] == "left_arm"
        assert PART_NAMES[map24to9(LABEL_24_NAMES.index("right_foot"))] == "lowright_leg"
        assert PART_NAMES[map24to9(LABEL_24_NAMES.index("neck"))] == "head"

    def test_matches_golden_file(self):
        for line in (DATA / "map24to9.txt").read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            idx, name24, name9 = line.split()
            assert LABEL_24_NAMES[int(idx)] == name24
            assert PART_NAMES[map24to9(int(idx))] == name9


class TestFlowGroundTruth:
    def _rigid_pair(self, v, n=300, seed=0):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(n, 3))
        verts = pts + rng.normal(size=(n, 3)) * 0.01  # vertices near their points
        ids = np.arange(n, dtype=np.int64)
        f0 = PointCloudFrame(points=pts, vertex_ids=ids)
        f1 = PointCloudFrame(points=pts + v, vertex_ids=ids.copy())
        return f0, f1, verts, verts + v

    def test_rigid_translation_exact(self):
        v = np.array([0.1, 0.0, 0.0])
        f0, f1, v0, v1 = self._rigid_pair(v)
        field = flow_ground_truth(f0, f1, v0, v1, threshold=0.1)
        assert field.n_valid == f0.n_points
        np.testing.assert_allclose(field.vectors, np.broadcast_to(v, (300, 3)), atol=1e-6)

    def test_identity_zero_flow(self):
        f0, f1, v0, v1 = self._rigid_pair(np.zeros(3), seed=1)
        field = flow_ground_truth(f0, f0, v0, v0, threshold=0.1)
        assert field.n_valid > 0
        np.testing.assert_array_equal(field.vectors[field.valid], 0.0)

    def test_occluded_subset_filtered(self):
        v = np.array([0.05, 0.02, 0.0])
        f0, f1, v0, v1 = self._rigid_pair(v, seed=2)
        # drop the first 50 points from frame t+1 (an "occluded limb")
        keep = np.arange(50, f1.n_points)
        f1c = f1.select(keep)
        field = flow_ground_truth(f0, f1c, v0, v1, threshold=0.1)
        assert not field.valid[:50].any()
        assert field.valid[50:].all()

    def test_threshold_zero_invalidates_all(self):
        f0, f1, v0, v1 = self._rigid_pair(np.zeros(3), seed=3)
        field = flow_ground_truth(f0, f1, v0, v1, threshold=0.0)
        assert field.n_valid == 0

    def test_mismatched_actor_errors(self):
        f0, f1, v0, v1 = self._rigid_pair(np.zeros(3), seed=4)
        with pytest.raises(ValueError, match="mismatched actors"):
            flow_ground_truth(f0, f1, v0[:10], v1[:9], threshold=0.1)
        with pytest.raises(ValueError, match="mismatched actors"):
            flow_ground_truth(f0, f1, v0[:10], v1[:10], threshold=0.1)

    def test_bidirectional_injective_on_real_scan(self):
        seq = make_sequence("walk", master_seed=99, index=0,
                            params=GenParams(n_frames=3, n_points=256))
        mesh = make_mesh_sequence("walk", master_seed=99, index=0,
                                  params=GenParams(n_frames=3, n_points=256))
        field = flow_ground_truth(seq.frames[0], seq.frames[1],
                                  mesh.vertices[0], mesh.vertices[1], threshold=0.1)
        assert field.n_valid > 30
        # surviving correspondences target distinct frame-t+1 points
        targets = seq.frames[0].points[field.valid] + field.vectors[field.valid]
        assert len(np.unique(np.round(targets, 9), axis=0)) == field.n_valid


class TestNnBaseline:
    def test_identity(self):
        rng = np.random.default_rng(0)
        f = PointCloudFrame(points=rng.normal(size=(50, 3)))
        field = nn_flow_baseline(f, f)
        np.testing.assert_array_equal(field.vectors, 0.0)
        assert field.valid.all()

    def test_pure_translation(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(size=(40, 3)) * 10  # well separated vs the shift
        v = np.array([0.01, 0.0, 0.0])
        f0 = PointCloudFrame(points=pts)
        f1 = PointCloudFrame(points=pts + v)
        field = nn_flow_baseline(f0, f1)
        np.testing.assert_allclose(field.vectors, np.broadcast_to(v, (40, 3)), atol=1e-12)


class TestHeuristicLabeler:
    def test_topmost_points_are_head(self):
        actor = build_actor(seed=0)
        labels = heuristic_part_labeler(actor.vertices)
        z = actor.vertices[:, 2]
        z01 = (z - z.min()) / (z.max() - z.min())
        assert (labels[z01 >= 0.92] == 0).all()

    def test_labels_in_range(self):
        rng = np.random.default_rng(2)
        labels = heuristic_part_labeler(rng.normal(size=(500, 3)))
        assert labels.min() >= 0 and labels.max() <= 8

    def test_agreement_with_ground_truth(self):
        actor = build_actor(seed=5)
        labels = heuristic_part_labeler(actor.vertices)
        agreement = (labels == actor.vertex_part).mean()
        assert agreement >= 0.60


class TestGenerate:
    def test_sequence_shape_and_channels(self):
        params = GenParams(n_frames=4, n_points=200)
        seq = make_sequence("wave", master_seed=5, index=1, params=params)
        assert len(seq) == 4
        for f in seq.frames:
            assert f.n_points == 200
            assert f.part_labels is not None and f.flow is not None
        assert seq.meta.joint_gt.shape == (4, 10, 3)
        assert seq.meta.motion_class == "wave"
        # flow of the last frame is all-invalid by construction
        assert not seq.frames[-1].flow_valid.any()
        assert seq.frames[0].flow_valid.sum() > 20

    def test_deterministic(self):
        params = GenParams(n_frames=3, n_points=128)
        a = make_sequence("squat", master_seed=7, index=2, params=params)
        b = make_sequence("squat", master_seed=7, index=2, params=params)
        for fa, fb in zip(a.frames, b.frames):
            np.testing.assert_array_equal(fa.points, fb.points)
            np.testing.assert_array_equal(fa.part_labels, fb.part_labels)
            np.testing.assert_array_equal(fa.flow, fb.flow)

    def test_different_indices_differ(self):
        params = GenParams(n_frames=2, n_points=128)
        a = make_sequence("walk", master_seed=7, index=0, params=params)
        b = make_sequence("walk", master_seed=7, index=1, params=params)
        assert not np.array_equal(a.frames[0].points, b.frames[0].points)
