"""Parameterized building blocks on top of the tensornet kernel."""
from __future__ import annotations

import math

import numpy as np

from .. import tensornet as tn
from ..tensornet import Tensor


class Linear:
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator,
                 dtype, zero_init: bool = False):
        if zero_init:
            w = np.zeros((d_in, d_out))
        else:
            std = math.sqrt(2.0 / (d_in + d_out))
            w = rng.normal(0.0, std, size=(d_in, d_out))
        self.w = Tensor(w, requires_grad=True, dtype=dtype)
        self.b = Tensor(np.zeros(d_out), requires_grad=True, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        # flatten leading dims so the whole call is one GEMM
        if x.ndim > 2:
            lead = x.shape[:-1]
            flat = tn.reshape(x, (-1, x.shape[-1]))
            out = tn.add(tn.matmul(flat, self.w), self.b)
            return tn.reshape(out, (*lead, self.w.shape[1]))
        return tn.add(tn.matmul(x, self.w), self.b)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class Mlp2:
    """Two-layer MLP with GELU in between."""

    def __init__(self, d_in: int, d_hidden: int, d_out: int,
                 rng: np.random.Generator, dtype, zero_out: bool = False):
        self.l1 = Linear(d_in, d_hidden, rng, dtype)
        self.l2 = Linear(d_hidden, d_out, rng, dtype, zero_init=zero_out)

    def __call__(self, x: Tensor) -> Tensor:
        return self.l2(tn.gelu(self.l1(x)))

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {**self.l1.named_params(f"{prefix}.l1"),
                **self.l2.named_params(f"{prefix}.l2")}


class LayerNorm:
    def __init__(self, dim: int, dtype):
        self.g = Tensor(np.ones(dim), requires_grad=True, dtype=dtype)
        self.b = Tensor(np.zeros(dim), requires_grad=True, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return tn.layernorm(x, self.g, self.b)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.g": self.g, f"{prefix}.b": self.b}


class MultiHeadAttention:
    def __init__(self, dim: int, n_heads: int, rng: np.random.Generator, dtype):
        self.dim = dim
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.qkv = Linear(dim, 3 * dim, rng, dtype)
        self.proj = Linear(dim, dim, rng, dtype)

    def __call__(self, x: Tensor, bias: Tensor | None = None) -> Tensor:
        g, s, c = x.shape
        h, hd = self.n_heads, self.head_dim
        qkv = tn.reshape(self.qkv(x), (g, s, 3, h, hd))

        def head_view(i):
            part = tn.reshape(tn.slice_axis(qkv, 2, i, i + 1), (g, s, h, hd))
            return tn.transpose(part, (0, 2, 1, 3))  # (g, h, s, hd)

        q, k, v = head_view(0), head_view(1), head_view(2)
        scores = tn.scale(tn.matmul(q, tn.transpose(k, (0, 1, 3, 2))),
                          1.0 / math.sqrt(hd))
        if bias is not None:
            scores = tn.add(scores, bias)  # (g, 1, s, s) broadcasts over heads
        out = tn.matmul(tn.softmax(scores), v)       # (g, h, s, hd)
        out = tn.reshape(tn.transpose(out, (0, 2, 1, 3)), (g, s, c))
        return self.proj(out)

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {**self.qkv.named_params(f"{prefix}.qkv"),
                **self.proj.named_params(f"{prefix}.proj")}


class Block:
    """Pre-norm transformer block: LN -> MHSA -> +, LN -> MLP -> +."""

    def __init__(self, dim: int, n_heads: int, mlp_ratio: int,
                 rng: np.random.Generator, dtype):
        self.ln1 = LayerNorm(dim, dtype)
        self.attn = MultiHeadAttention(dim, n_heads, rng, dtype)
        self.ln2 = LayerNorm(dim, dtype)
        self.mlp = Mlp2(dim, mlp_ratio * dim, dim, rng, dtype)

    def __call__(self, x: Tensor, bias: Tensor | None = None) -> Tensor:
        x = tn.add(x, self.attn(self.ln1(x), bias))
        return tn.add(x, self.mlp(self.ln2(x)))

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return {**self.ln1.named_params(f"{prefix}.ln1"),
                **self.attn.named_params(f"{prefix}.attn"),
                **self.ln2.named_params(f"{prefix}.ln2"),
                **self.mlp.named_params(f"{prefix}.mlp")}
