import numpy as np
import pytest

from pvuh.data import prepare_dataset, split_dataset, subsample_fraction
from pvuh.errors import DataError
from pvuh.geom import PointCloudFrame, PointSequence, SequenceMeta


def _seq(cls, seed=0, n=40, L=2):
    rng = np.random.default_rng(seed)
    frames = [PointCloudFrame(points=rng.normal(size=(n, 3)) * 2 + 5,
                              part_labels=rng.integers(0, 9, n).astype(np.int16))
              for _ in range(L)]
    return PointSequence(frames=frames, meta=SequenceMeta(motion_class=cls))


def _pool(counts: dict, seed=0):
    out = []
    i = 0
    for cls, n in counts.items():
        for _ in range(n):
            out.append(_seq(cls, seed=seed + i))
            i += 1
    return out


class TestSplit:
    def test_stratified_80_20(self):
        pool = _pool({"a": 25, "b": 25, "c": 25, "d": 25})
        train, test = split_dataset(pool, (0.8, 0.2), seed=0)
        assert len(train) == 80 and len(test) == 20
        for cls in "abcd":
            n_tr = sum(s.meta.motion_class == cls for s in train)
            assert abs(n_tr - 20) <= 1

    def test_deterministic(self):
        pool = _pool({"a": 10, "b": 10})
        t1, _ = split_dataset(pool, (0.7, 0.3), seed=3)
        t2, _ = split_dataset(pool, (0.7, 0.3), seed=3)
        assert [id(s) for s in t1] == [id(s) for s in t2]

    def test_disjoint_and_complete(self):
        pool = _pool({"a": 9, "b": 7})
        train, test = split_dataset(pool, (0.5, 0.5), seed=1)
        ids_train = {id(s) for s in train}
        ids_test = {id(s) for s in test}
        assert not ids_train & ids_test
        assert len(ids_train | ids_test) == 16

    def test_small_class_errors(self):
        pool = _pool({"a": 5, "b": 1})
        with pytest.raises(DataError, match="'b'"):
            split_dataset(pool, (0.8, 0.2), seed=0)

    def test_exact_200_60(self):
        pool = _pool({"walk": 87, "wave": 87, "squat": 86})
        train, test = split_dataset(pool, (200 / 260, 60 / 260), seed=5)
        assert len(train) == 200 and len(test) == 60

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            split_dataset(_pool({"a": 4}), (0.5, 0.4), seed=0)


class TestPrepare:
    def test_normalization_and_classes(self):
        pool = _pool({"walk": 3, "wave": 2})
        prep = prepare_dataset(pool, ["walk", "wave"], n_patch_points=8)
        assert prep.class_names == ["walk", "wave"]
        np.testing.assert_array_equal(prep.labels, [0, 0, 0, 1, 1])
        for s in prep.samples:
            r = np.linalg.norm(s.sequence.all_points(), axis=1).max()
            assert r <= 1.0 + 1e-9

    def test_unknown_class_errors(self):
        with pytest.raises(DataError, match="not in"):
            prepare_dataset(_pool({"jump": 2}), ["walk"])

    def test_patch_cache_stable(self):
        prep = prepare_dataset(_pool({"walk": 2}), ["walk"], n_patch_points=8)
        a = prep.patch(0)
        assert prep.patch(0) is a  # cached object


class TestSubsample:
    def test_counts_and_classes(self):
        prep = prepare_dataset(_pool({"a": 10, "b": 20}), ["a", "b"])
        sub = subsample_fraction(prep, 0.5, seed=0)
        labels = sub.labels
        assert (labels == 0).sum() == 5 and (labels == 1).sum() == 10

    def test_full_fraction_identity(self):
        prep = prepare_dataset(_pool({"a": 4}), ["a"])
        assert subsample_fraction(prep, 1.0) is prep

    def test_patch_seed_survives_subsampling(self):
        prep = prepare_dataset(_pool({"a": 6}), ["a"], n_patch_points=8)
        sub = subsample_fraction(prep, 0.5, seed=1)
        for s in sub.samples:
            src = next(i for i, x in enumerate(prep.samples) if x is s)
            assert s.patch_seed == prep.samples[src].patch_seed

    def test_min_one_per_class(self):
        prep = prepare_dataset(_pool({"a": 3, "b": 3}), ["a", "b"])
        sub = subsample_fraction(prep, 0.01, seed=0)
        assert (sub.labels == 0).sum() >= 1 and (sub.labels == 1).sum() >= 1
