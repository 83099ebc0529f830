"""Learnable positional encodings: MLP of the patch center (spatial)
and MLP of the raw frame index (temporal)."""
from __future__ import annotations

import numpy as np

from ..tensornet import Tensor
from .layers import Mlp2


class PositionalEncoders:
    def __init__(self, token_dim: int, hidden: int, rng: np.random.Generator, dtype):
        self.spatial = Mlp2(3, hidden, token_dim, rng, dtype)
        self.temporal = Mlp2(1, hidden, token_dim, rng, dtype)
        self.dtype = dtype

    def spatial_pe(self, centers: np.ndarray | Tensor) -> Tensor:
        if not isinstance(centers, Tensor):
            centers = Tensor(centers, dtype=self.dtype)
        return self.spatial(centers)

    def temporal_pe(self, frame_indices: np.ndarray) -> Tensor:
        idx = np.asarray(frame_indices, dtype=np.float64).reshape(-1, 1)
        return self.temporal(Tensor(idx, dtype=self.dtype))

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {**self.spatial.named_params(f"{prefix}.spatial"),
                **self.temporal.named_params(f"{prefix}.temporal")}
