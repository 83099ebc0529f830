"""Mini-PointNet patch tokenizer.

Per point: shared MLP lifts coordinates, the patch max-pool is
concatenated back onto every point feature, and further MLPs expand to
the token width. The final max-pool over the patch happens at the call
site so a flow branch can be fused in (element-wise add) first.
"""
from __future__ import annotations

import numpy as np

from .. import tensornet as tn
from ..tensornet import Tensor
from .layers import Linear


class MiniPointNet:
    def __init__(self, d_in: int, d1: int, d2: int, token_dim: int,
                 rng: np.random.Generator, dtype, zero_out: bool = False):
        self.lin1 = Linear(d_in, d1, rng, dtype)
        self.lin2 = Linear(d1, d2, rng, dtype)
        self.lin3 = Linear(2 * d2, 2 * d2, rng, dtype)
        self.lin4 = Linear(2 * d2, token_dim, rng, dtype, zero_init=zero_out)

    def point_features(self, x: Tensor) -> Tensor:
        """(P, N', d_in) -> per-point token-width features (P, N', C)."""
        h = self.lin2(tn.gelu(self.lin1(x)))                 # (P, N', d2)
        pooled = tn.max_axis(h, axis=1, keepdims=True)       # (P, 1, d2)
        tiled = tn.broadcast_to(pooled, h.shape)
        h = tn.concat([h, tiled], axis=2)                    # (P, N', 2*d2)
        return self.lin4(tn.gelu(self.lin3(h)))

    def __call__(self, x: Tensor) -> Tensor:
        """(P, N', d_in) -> tokens (P, C) via the final max-pool."""
        return tn.max_axis(self.point_features(x), axis=1)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for i, lin in enumerate((self.lin1, self.lin2, self.lin3, self.lin4), 1):
            out.update(lin.named_params(f"{prefix}.lin{i}"))
        return out


def fused_tokens(part_tok: MiniPointNet, flow_tok: MiniPointNet | None,
                 patches: Tensor, flows: Tensor | None) -> Tensor:
    """Part tokens, optionally fused with a flow feature branch."""
    feats = part_tok.point_features(patches)
    if flows is not None:
        if flow_tok is None:
            raise ValueError("flow given but the model has no flow branch")
        feats = tn.add(feats, flow_tok.point_features(flows))
    return tn.max_axis(feats, axis=1)
