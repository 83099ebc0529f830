"""Pretraining and fine-tuning loops.

Single-owner training step; all randomness (shuffles, mask plans) is
derived statelessly from (seed, epoch, sample index), so resuming from a
checkpoint reproduces the continuation bitwise at a fixed thread count.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import tensornet as tn
from .data import PreparedDataset
from .errors import DivergenceError
from .metrics import MetricsReport, mean_class_accuracy, mpjpe
from .model import (FinetuneModel, ModelConfig, PretrainModel,
                    collate_finetune, collate_pretrain)
from .patchmask import apply_mask, plan_mask
from .tensornet import AdamW, Tensor, cosine_lr


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    lr0: float = 1e-3
    weight_decay: float = 0.05
    schedule: str = "constant"  # "constant" | "cosine"
    seed: int = 0
    stage: str = "pretrain"
    snapshot_every: int = 0     # epochs between snapshots; 0 = final only

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown schedule {self.schedule!r}")


def _lr_at(cfg: TrainConfig, step: int, total_steps: int) -> float:
    if cfg.schedule == "cosine":
        return cosine_lr(min(step, total_steps), total_steps, cfg.lr0)
    return cfg.lr0


def _epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((seed, 104729, epoch)))
    return rng.permutation(n)


def _plan_seed(seed: int, epoch: int, sample_idx: int) -> int:
    ss = np.random.SeedSequence((seed, 15485863, epoch, sample_idx))
    return int(ss.generate_state(1)[0])


def export_weights(model) -> dict[str, np.ndarray]:
    return {k: p.data.astype(np.float32).copy() for k, p in model.params.items()}


def load_weights(model, weights: dict[str, np.ndarray]) -> None:
    """Restore a full same-stage parameter set; strict on names and shapes."""
    from .errors import CheckpointError

    missing = [k for k in model.params if k not in weights]
    extra = [k for k in weights if k not in model.params]
    mismatched = [
        f"{k}: checkpoint {np.asarray(weights[k]).shape} vs model {p.data.shape}"
        for k, p in model.params.items()
        if k in weights and np.asarray(weights[k]).shape != p.data.shape]
    if missing or extra or mismatched:
        raise CheckpointError(
            f"incompatible checkpoint; missing: {missing or 'none'}; "
            f"unexpected: {extra or 'none'}; mismatched shapes: "
            f"{mismatched or 'none'}")
    for k, p in model.params.items():
        p.data[...] = np.asarray(weights[k]).astype(p.data.dtype)


def _guard_finite(value: float, step: int, lr: float) -> None:
    if not math.isfinite(value):
        raise DivergenceError(f"loss became {value} at step {step} (lr={lr:g})")


# ---------------------------------------------------------------------------
# pretraining


@dataclass
class PretrainResult:
    model: PretrainModel
    optimizer: AdamW
    curve: list[tuple[int, float, float]] = field(default_factory=list)


def pretrain(prepared: PreparedDataset, model_cfg: ModelConfig,
             train_cfg: TrainConfig, r_t: float = 0.8, r_s: float = 0.6,
             model: Optional[PretrainModel] = None,
             optimizer: Optional[AdamW] = None, start_epoch: int = 0,
             dtype=np.float32,
             on_epoch: Optional[Callable[[int, float], None]] = None,
             snapshot_fn: Optional[Callable[[int, PretrainModel, AdamW], None]] = None,
             ) -> PretrainResult:
    """Masked-reconstruction self-learning over a labeled (but unused-label)
    dataset. Fresh mask plan per sample per epoch."""
    if model is None:
        model = PretrainModel(model_cfg, seed=train_cfg.seed, dtype=dtype)
    if optimizer is None:
        optimizer = AdamW(model.params, lr=train_cfg.lr0,
                          weight_decay=train_cfg.weight_decay)
    n = len(prepared)
    steps_per_epoch = math.ceil(n / train_cfg.batch_size)
    total_steps = train_cfg.epochs * steps_per_epoch
    step = start_epoch * steps_per_epoch
    curve: list[tuple[int, float, float]] = []
    warned_empty = False

    for epoch in range(start_epoch, train_cfg.epochs):
        order = _epoch_order(train_cfg.seed, epoch, n)
        losses = []
        for b0 in range(0, n, train_cfg.batch_size):
            idxs = order[b0:b0 + train_cfg.batch_size]
            masked = []
            for i in idxs:
                plan = plan_mask(model_cfg.n_frames, model_cfg.n_parts, r_t, r_s,
                                 seed=_plan_seed(train_cfg.seed, epoch, int(i)))
                masked.append(apply_mask(prepared.patch(int(i)), plan))
            if all(len(m.spatial_slots) + len(m.temporal_slots) == 0 for m in masked):
                if not warned_empty:
                    warnings.warn("mask plan has zero masked slots; skipping steps")
                    warned_empty = True
                continue
            batch = collate_pretrain(masked, model_cfg)
            out = model.forward(batch)
            loss = float(out.loss.data)
            lr = _lr_at(train_cfg, step, total_steps)
            _guard_finite(loss, step, lr)
            optimizer.zero_grad()
            tn.backward(out.loss)
            optimizer.step(lr)
            curve.append((step, lr, loss))
            losses.append(loss)
            step += 1
        if on_epoch and losses:
            on_epoch(epoch, float(np.mean(losses)))
        if snapshot_fn and train_cfg.snapshot_every and \
                (epoch + 1) % train_cfg.snapshot_every == 0:
            snapshot_fn(epoch, model, optimizer)
    if snapshot_fn:
        snapshot_fn(train_cfg.epochs - 1, model, optimizer)
    return PretrainResult(model=model, optimizer=optimizer, curve=curve)


# ---------------------------------------------------------------------------
# losses


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    b, k = logits.shape
    m = tn.max_axis(logits, axis=1, keepdims=True)
    z = tn.sub(logits, m)
    lse = tn.log(tn.sum_axis(tn.exp(z), axis=1, keepdims=True))
    logp = tn.sub(z, lse)
    onehot = np.zeros((b, k))
    onehot[np.arange(b), np.asarray(labels)] = 1.0
    picked = tn.sum_axis(tn.mul(logp, Tensor(onehot, dtype=logits.dtype)), axis=1)
    return tn.neg(tn.mean_axis(picked))


def pose_l2(pred: Tensor, target: np.ndarray) -> Tensor:
    diff = tn.sub(pred, Tensor(target, dtype=pred.dtype))
    return tn.mean_axis(tn.mul(diff, diff))


def _root_relative(joints: np.ndarray, root: int) -> np.ndarray:
    return joints - joints[:, root:root + 1]


# ---------------------------------------------------------------------------
# fine-tuning


@dataclass
class FinetuneResult:
    model: FinetuneModel
    reports: list[MetricsReport] = field(default_factory=list)
    curve: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def final_report(self) -> MetricsReport:
        return self.reports[-1]


def finetune(train_set: PreparedDataset, test_set: PreparedDataset,
             model_cfg: ModelConfig, train_cfg: TrainConfig,
             pretrained: Optional[dict[str, np.ndarray]] = None,
             dtype=np.float32,
             on_epoch: Optional[Callable[[int, float, MetricsReport], None]] = None,
             ) -> FinetuneResult:
    """Supervised head training (action or pose), optionally from a
    pretrained encoder; evaluates on the test split every epoch."""
    model = FinetuneModel(model_cfg, seed=train_cfg.seed, dtype=dtype)
    if pretrained is not None:
        model.load_pretrained(pretrained)
    optimizer = AdamW(model.params, lr=train_cfg.lr0,
                      weight_decay=train_cfg.weight_decay)
    n = len(train_set)
    steps_per_epoch = math.ceil(n / train_cfg.batch_size)
    total_steps = train_cfg.epochs * steps_per_epoch
    labels = train_set.labels
    step = 0
    curve, reports = [], []

    for epoch in range(train_cfg.epochs):
        order = _epoch_order(train_cfg.seed, epoch, n)
        losses = []
        for b0 in range(0, n, train_cfg.batch_size):
            idxs = order[b0:b0 + train_cfg.batch_size]
            batch = collate_finetune([train_set.patch(int(i)) for i in idxs],
                                     model_cfg)
            out = model.forward(batch)
            if model_cfg.head == "action":
                loss_t = cross_entropy(out, labels[idxs])
            else:
                gt = np.stack([_root_relative(
                    train_set.samples[int(i)].sequence.meta.joint_gt,
                    model_cfg.root_joint) for i in idxs])
                loss_t = pose_l2(out, gt)
            loss = float(loss_t.data)
            lr = _lr_at(train_cfg, step, total_steps)
            _guard_finite(loss, step, lr)
            optimizer.zero_grad()
            tn.backward(loss_t)
            optimizer.step(lr)
            curve.append((step, lr, loss))
            losses.append(loss)
            step += 1

        report = evaluate(model, test_set, model_cfg,
                          batch_size=train_cfg.batch_size)
        report.stage = "finetune"
        report.epoch = epoch
        report.extras["train_loss"] = float(np.mean(losses))
        reports.append(report)
        if on_epoch:
            on_epoch(epoch, float(np.mean(losses)), report)
    return FinetuneResult(model=model, reports=reports, curve=curve)


def evaluate(model: FinetuneModel, dataset: PreparedDataset,
             model_cfg: ModelConfig, batch_size: int = 16) -> MetricsReport:
    """Test-split metrics: mAcc for the action head, MPJPE (mm, true
    metric scale) for the pose head."""
    if model_cfg.head == "action":
        preds = predict_actions(model, dataset, model_cfg, batch_size)
        per_class, macc = mean_class_accuracy(preds, dataset.labels,
                                              model_cfg.n_classes)
        return MetricsReport(macc=macc,
                             per_class_acc=[float(v) for v in per_class])
    errors = []
    for i in range(len(dataset)):
        pred = predict_joints(model, dataset, model_cfg, i)
        sample = dataset.samples[i]
        gt = _root_relative(sample.sequence.meta.joint_gt, model_cfg.root_joint)
        errors.append(mpjpe(pred * sample.norm.scale, gt * sample.norm.scale,
                            root_index=model_cfg.root_joint))
    return MetricsReport(mpjpe_mm=float(np.mean(errors)))


def predict_actions(model: FinetuneModel, dataset: PreparedDataset,
                    model_cfg: ModelConfig, batch_size: int = 16) -> np.ndarray:
    preds = []
    with tn.no_grad():
        for b0 in range(0, len(dataset), batch_size):
            idxs = range(b0, min(b0 + batch_size, len(dataset)))
            batch = collate_finetune([dataset.patch(i) for i in idxs], model_cfg)
            logits = model.forward(batch)
            preds.append(np.argmax(logits.data, axis=1))
    return np.concatenate(preds)


def predict_joints(model: FinetuneModel, dataset: PreparedDataset,
                   model_cfg: ModelConfig, idx: int) -> np.ndarray:
    with tn.no_grad():
        batch = collate_finetune([dataset.patch(idx)], model_cfg)
        return model.forward(batch).data[0]
