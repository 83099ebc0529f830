"""Learnable-parameter accounting per training stage."""
from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .finetune import FinetuneModel
from .mae import PretrainModel


def count_params(cfg: ModelConfig, stage: str = "pretrain") -> int:
    """Exact learnable scalar count for one stage of the pipeline."""
    if stage == "pretrain":
        model = PretrainModel(cfg, seed=0, dtype=np.float32)
    elif stage == "finetune":
        model = FinetuneModel(cfg, seed=0, dtype=np.float32)
    else:
        raise ValueError(f"unknown stage {stage!r}")
    return sum(p.data.size for p in model.params.values())


def param_breakdown(cfg: ModelConfig, stage: str = "pretrain") -> dict[str, int]:
    """Scalar counts grouped by top-level module."""
    model = PretrainModel(cfg, 0, np.float32) if stage == "pretrain" \
        else FinetuneModel(cfg, 0, np.float32)
    out: dict[str, int] = {}
    for name, p in model.params.items():
        top = name.split(".")[0]
        out[top] = out.get(top, 0) + p.data.size
    return out
