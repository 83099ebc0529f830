"""Dataset assembly: normalization, patch-tensor caching, and splits."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError
from .geom import NormRecord, PointSequence, normalize_sequence
from .patchmask import PatchTensor, build_patch_tensor, round_half_up


@dataclass
class PreparedSample:
    """A normalized sequence ready for the model."""

    sequence: PointSequence           # normalized coordinates
    norm: NormRecord
    class_id: int
    patch_seed: int = 0               # assigned once; survives subsampling
    patch_tensor: Optional[PatchTensor] = None


@dataclass
class PreparedDataset:
    samples: list[PreparedSample]
    class_names: list[str]
    n_patch_points: int = 48
    patch_seed: int = 0

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.class_id for s in self.samples])

    def patch(self, idx: int) -> PatchTensor:
        """Patch tensor of one sample, built once and cached."""
        s = self.samples[idx]
        if s.patch_tensor is None:
            with_flow = s.sequence.frames[0].flow is not None
            s.patch_tensor = build_patch_tensor(
                s.sequence, with_flow=with_flow, seed=s.patch_seed,
                n_patch_points=self.n_patch_points)
        return s.patch_tensor


def prepare_dataset(sequences: list[PointSequence], class_names: list[str] | None = None,
                    n_patch_points: int = 48, patch_seed: int = 0) -> PreparedDataset:
    """Normalize sequences and index their action classes."""
    if not sequences:
        raise DataError("empty dataset")
    if class_names is None:
        class_names = sorted({s.meta.motion_class for s in sequences})
    index = {name: i for i, name in enumerate(class_names)}
    samples = []
    for i, seq in enumerate(sequences):
        if seq.meta.motion_class not in index:
            raise DataError(f"sequence class {seq.meta.motion_class!r} not in "
                            f"{class_names}")
        norm_seq, rec = normalize_sequence(seq)
        samples.append(PreparedSample(sequence=norm_seq, norm=rec,
                                      class_id=index[seq.meta.motion_class],
                                      patch_seed=patch_seed + 7919 * i))
    return PreparedDataset(samples=samples, class_names=list(class_names),
                           n_patch_points=n_patch_points, patch_seed=patch_seed)


def split_dataset(sequences: list[PointSequence], fractions: tuple[float, float],
                  seed: int = 0) -> tuple[list[PointSequence], list[PointSequence]]:
    """Stratified train/test split by motion class, deterministic per seed."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    by_class: dict[str, list[int]] = {}
    for i, s in enumerate(sequences):
        by_class.setdefault(s.meta.motion_class, []).append(i)

    train_idx, test_idx = [], []
    for name in sorted(by_class):
        idx = np.array(by_class[name])
        if len(idx) < 2:
            raise DataError(f"class {name!r} has {len(idx)} sequence(s); need >= 2")
        perm = rng.permutation(len(idx))
        n_train = round_half_up(fractions[0] * len(idx))
        n_train = min(max(n_train, 1), len(idx) - 1)
        train_idx.extend(idx[perm[:n_train]].tolist())
        test_idx.extend(idx[perm[n_train:]].tolist())
    return ([sequences[i] for i in sorted(train_idx)],
            [sequences[i] for i in sorted(test_idx)])


def subsample_fraction(prepared: PreparedDataset, fraction: float,
                       seed: int = 0) -> PreparedDataset:
    """Stratified subset of a prepared dataset (semi-supervised analogue)."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return prepared
    rng = np.random.default_rng(seed)
    labels = prepared.labels
    keep: list[int] = []
    for c in np.unique(labels):
        idx = np.where(labels == c)[0]
        n = max(1, round_half_up(fraction * len(idx)))
        perm = rng.permutation(len(idx))
        keep.extend(idx[perm[:n]].tolist())
    keep.sort()
    return PreparedDataset(samples=[prepared.samples[i] for i in keep],
                           class_names=prepared.class_names,
                           n_patch_points=prepared.n_patch_points,
                           patch_seed=prepared.patch_seed)
