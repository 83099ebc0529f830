"""Attention over variable-size token groups via pad-and-gather.

A spatial layer attends within each (sample, frame) token set, a
temporal layer along each (sample, part-slot) track. Both reduce to the
same mechanics: gather the flat token list into a padded (groups, slot)
grid, run batched attention with an additive key bias at pads, and
gather back.
"""
from __future__ import annotations

import numpy as np

from .. import tensornet as tn
from ..tensornet import Tensor

_NEG = -1e9


class TokenGroups:
    """Precomputed gather/scatter indices for one grouping of T tokens."""

    def __init__(self, group_ids: np.ndarray):
        group_ids = np.asarray(group_ids)
        self.n_tokens = len(group_ids)
        _, inverse = np.unique(group_ids, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        counts = np.bincount(inverse)
        self.n_groups = len(counts)
        self.width = int(counts.max())

        # token row `n_tokens` is the appended zero row (the pad target)
        gather = np.full((self.n_groups, self.width), self.n_tokens, dtype=np.int64)
        starts = np.zeros(self.n_groups + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        sorted_groups = inverse[order]
        slots = np.arange(self.n_tokens) - starts[sorted_groups]
        gather[sorted_groups, slots] = order
        slot_in_group = np.empty(self.n_tokens, dtype=np.int64)
        slot_in_group[order] = slots
        self.gather_flat = gather.reshape(-1)
        self.inverse_flat = inverse * self.width + slot_in_group
        self.uniform = bool((counts == counts[0]).all())
        if self.uniform:
            self.bias = None
        else:
            pad = gather == self.n_tokens  # (G, W)
            bias = np.where(pad[:, None, None, :], _NEG, 0.0)  # (G,1,1,W) keys
            self.bias = np.broadcast_to(bias, (self.n_groups, 1, self.width, self.width))

    def bias_tensor(self, dtype) -> Tensor | None:
        if self.bias is None:
            return None
        return Tensor(np.ascontiguousarray(self.bias), dtype=dtype)


def run_grouped(x: Tensor, groups: TokenGroups, block, bias: Tensor | None) -> Tensor:
    """Apply a block over the padded group view of flat tokens (T, C)."""
    c = x.shape[-1]
    zero_row = Tensor(np.zeros((1, c)), dtype=x.dtype)
    padded = tn.concat([x, zero_row], axis=0)
    grid = tn.reshape(tn.index_select(padded, groups.gather_flat),
                      (groups.n_groups, groups.width, c))
    out = block(grid, bias)
    flat = tn.reshape(out, (groups.n_groups * groups.width, c))
    return tn.index_select(flat, groups.inverse_flat)
