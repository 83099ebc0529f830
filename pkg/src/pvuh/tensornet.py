"""Dense-tensor reverse-mode differentiation kernel.

A deliberately small tape: each op builds an output ``Tensor`` holding a
closure that scatters the output gradient back to its parents. Graphs
are single-owner and freed by :func:`backward`; independent graphs may
run in parallel threads.

Training runs in float32, gradient checks in float64; switch with
:func:`set_default_dtype`.
"""
from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "backward",
    "set_default_dtype",
    "get_default_dtype",
    "no_grad",
    "add", "sub", "mul", "neg", "scale", "matmul", "concat", "index_select",
    "slice_axis", "reshape", "transpose", "broadcast_to", "layernorm",
    "softmax", "gelu", "max_axis", "min_axis", "sum_axis", "mean_axis",
    "log", "exp",
    "AdamW",
    "cosine_lr",
]

_DEFAULT_DTYPE = np.float32
_GRAD_ENABLED = True


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextmanager
def no_grad():
    """Disable tape construction inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_freed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.requires_grad = bool(requires_grad)
        # parameters carry an always-present grad buffer so a parameter
        # disconnected from the loss reads back a zero gradient
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents: tuple = ()
        self._backward_fn = None
        self._freed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, grad={self.requires_grad})"

    # light operator sugar; constants are wrapped as non-grad tensors
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.grad = None
    out._freed = False
    if out.requires_grad:
        out._parents = parents
        out._backward_fn = backward_fn
    else:
        out._parents = ()
        out._backward_fn = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def bwd(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def bwd(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(-_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def bwd(g):
        a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        a.accumulate(-g)

    return _make(-a.data, (a,), bwd)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def bwd(g):
        a.accumulate(g * s)

    return _make(a.data * s, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def bwd(g):
        ga = g @ np.swapaxes(b.data, -1, -2) if b.data.ndim > 1 else np.outer(g, b.data)
        gb = np.swapaxes(a.data, -1, -2) @ g
        a.accumulate(_unbroadcast(ga, a.data.shape))
        b.accumulate(_unbroadcast(gb, b.data.shape))

    return _make(data, (a, b), bwd)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def bwd(g):
        offset = 0
        for t, s in zip(tensors, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offset, offset + s)
            t.accumulate(g[tuple(sl)])
            offset += s

    return _make(data, tuple(tensors), bwd)


def index_select(a: Tensor, indices: np.ndarray, axis: int = 0) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    data = np.take(a.data, idx, axis=axis)

    def bwd(g):
        buf = np.zeros_like(a.data)
        if axis == 0:
            np.add.at(buf, idx, g)
        else:
            moved = np.moveaxis(buf, axis, 0)
            np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        a.accumulate(buf)

    return _make(data, (a,), bwd)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)
    data = a.data[sl]

    def bwd(g):
        buf = np.zeros_like(a.data)
        buf[sl] = g
        a.accumulate(buf)

    return _make(data, (a,), bwd)


def broadcast_to(a: Tensor, shape) -> Tensor:
    """Broadcast-view with a summing backward; cheaper than gather-tiling."""
    shape = tuple(shape)
    data = np.broadcast_to(a.data, shape)

    def bwd(g):
        a.accumulate(_unbroadcast(g, a.data.shape))

    return _make(data, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = a.data.reshape(shape)

    def bwd(g):
        a.accumulate(g.reshape(a.data.shape))

    return _make(data, (a,), bwd)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = np.argsort(axes)
    data = a.data.transpose(axes)

    def bwd(g):
        a.accumulate(g.transpose(inv))

    return _make(data, (a,), bwd)


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    data = xhat * gamma.data + beta.data

    def bwd(g):
        n = x.data.shape[-1]
        dxhat = g * gamma.data
        term = dxhat - dxhat.mean(axis=-1, keepdims=True) \
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        x.accumulate(term * inv_std)
        axes = tuple(range(g.ndim - 1))
        gamma.accumulate(_unbroadcast((g * xhat).sum(axis=axes), gamma.data.shape))
        beta.accumulate(_unbroadcast(g.sum(axis=axes), beta.data.shape))

    return _make(data, (x, gamma, beta), bwd)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis (shift-stable)."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    data = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        s = (g * data).sum(axis=-1, keepdims=True)
        x.accumulate(data * (g - s))

    return _make(data, (x,), bwd)


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    data = x.data * cdf

    def bwd(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        x.accumulate(g * (cdf + x.data * pdf))

    return _make(data.astype(x.data.dtype, copy=False), (x,), bwd)


def max_axis(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Max over one axis; gradient routes to the first (lowest-index) argmax."""
    idx = np.argmax(x.data, axis=axis)
    data = np.max(x.data, axis=axis, keepdims=keepdims)

    def bwd(g):
        buf = np.zeros_like(x.data)
        gg = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(buf, np.expand_dims(idx, axis), gg, axis=axis)
        x.accumulate(buf)

    return _make(data, (x,), bwd)


def min_axis(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    """Min over one axis via ``-max(-x)``; argmin-branch subgradient."""
    return neg(max_axis(neg(x), axis=axis, keepdims=keepdims))


def sum_axis(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            x.accumulate(np.broadcast_to(g, x.data.shape).copy() if np.ndim(g) else np.full_like(x.data, g))
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            x.accumulate(np.broadcast_to(gg, x.data.shape))

    return _make(data, (x,), bwd)


def mean_axis(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else x.data.shape[axis]
    return scale(sum_axis(x, axis=axis, keepdims=keepdims), 1.0 / n)


def log(x: Tensor) -> Tensor:
    def bwd(g):
        x.accumulate(g / x.data)

    return _make(np.log(x.data), (x,), bwd)


def exp(x: Tensor) -> Tensor:
    data = np.exp(x.data)

    def bwd(g):
        x.accumulate(g * data)

    return _make(data, (x,), bwd)


# ---------------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor) -> None:
    """Populate gradients of everything reachable from ``loss``.

    The tape is released afterwards; a second call on the same graph
    raises.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss._freed:
        raise RuntimeError("backward already called on this graph; rebuild it first")

    # iterative topological order (graphs are deep enough to overflow recursion)
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    loss.accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
        node._freed = True
        node._backward_fn = None
        node._parents = ()


# ---------------------------------------------------------------------------
# optimizer and schedule


class AdamW:
    """Adam with decoupled weight decay over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else 0.0
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            if self.weight_decay:
                p.data *= 1.0 - lr * self.weight_decay
            denom = np.sqrt(v / bc2) + self.eps
            p.data -= (lr / bc1) * m / denom

    def state_dict(self) -> dict:
        return {
            "step": self.step_count,
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.step_count = int(state["step"])
        for k in self.params:
            self.m[k] = np.array(state["m"][k], dtype=self.m[k].dtype)
            self.v[k] = np.array(state["v"][k], dtype=self.v[k].dtype)


def cosine_lr(step: int, total_steps: int, lr0: float) -> float:
    """Half-cosine decay from ``lr0`` at step 0 to 0 at ``total_steps``."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))
