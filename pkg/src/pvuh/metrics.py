"""Evaluation metric suite: action, pose, flow, and segmentation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .synthgen.flow import FlowField


def mean_class_accuracy(pred: np.ndarray, true: np.ndarray,
                        n_classes: int) -> tuple[np.ndarray, float]:
    """Per-class recall and its mean over the classes present in ``true``.

    Absent classes carry ``nan`` in the per-class vector and are skipped
    by the mean, so duplicating samples of one class never changes mAcc.
    """
    pred = np.asarray(pred)
    true = np.asarray(true)
    if len(true) == 0:
        raise ValueError("empty label arrays")
    if len(pred) != len(true):
        raise ValueError("prediction/label length mismatch")
    per_class = np.full(n_classes, np.nan)
    for c in range(n_classes):
        m = true == c
        if m.any():
            per_class[c] = float((pred[m] == c).mean())
    present = ~np.isnan(per_class)
    return per_class, float(np.nanmean(per_class)) if present.any() else 0.0


def mpjpe(pred: np.ndarray, gt: np.ndarray, root_index: int = 0) -> float:
    """Mean per-joint position error after root alignment, millimeters.

    Inputs are (L, J, 3) in meters (or any consistent metric unit times
    1e-3).
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
    pred = pred - pred[:, root_index:root_index + 1]
    gt = gt - gt[:, root_index:root_index + 1]
    return float(np.linalg.norm(pred - gt, axis=-1).mean() * 1000.0)


def flow_metrics(pred: FlowField, gt: FlowField) -> dict[str, float]:
    """EPE / acc_strict / acc_relax / outlier over the gt-valid points.

    Relative-error terms use the ground-truth flow norm and are skipped
    for zero-magnitude ground truth.
    """
    valid = gt.valid
    if not valid.any():
        raise ValueError("no valid ground-truth flow points")
    err = np.linalg.norm(pred.vectors[valid] - gt.vectors[valid], axis=1)
    mag = np.linalg.norm(gt.vectors[valid], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(mag > 0, err / np.where(mag > 0, mag, 1.0), np.inf)
    return {
        "epe": float(err.mean()),
        "acc_strict": float(((err < 0.05) | (rel < 0.05)).mean()),
        "acc_relax": float(((err < 0.1) | (rel < 0.1)).mean()),
        "outlier": float(((err > 0.3) | (rel > 0.1)).mean()),
    }


def miou(pred: np.ndarray, gt: np.ndarray,
         n_classes: int = 9) -> tuple[np.ndarray, float]:
    """Intersection-over-union per part class and the mean over classes
    present in the ground truth (the noise class never enters the mean)."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError("label arrays differ in shape")
    ious = np.full(n_classes, np.nan)
    for c in range(n_classes):
        gt_c = gt == c
        pr_c = pred == c
        if not gt_c.any():
            continue
        union = (gt_c | pr_c).sum()
        ious[c] = float((gt_c & pr_c).sum() / union) if union else np.nan
    present = ~np.isnan(ious)
    return ious, float(np.nanmean(ious)) if present.any() else 0.0


@dataclass
class MetricsReport:
    """Structured evaluation results with a stable key schema."""

    stage: str = ""
    epoch: int = -1
    macc: Optional[float] = None
    per_class_acc: Optional[list[float]] = None
    mpjpe_mm: Optional[float] = None
    epe: Optional[float] = None
    acc_strict: Optional[float] = None
    acc_relax: Optional[float] = None
    outlier: Optional[float] = None
    miou: Optional[float] = None
    per_part_iou: Optional[list[float]] = None
    extras: dict[str, float] = field(default_factory=dict)

    def to_document(self) -> str:
        lines = [f"report.stage = {self.stage}", f"report.epoch = {self.epoch}"]
        scalars = ("macc", "mpjpe_mm", "epe", "acc_strict", "acc_relax",
                   "outlier", "miou")
        for key in scalars:
            v = getattr(self, key)
            if v is not None:
                lines.append(f"metrics.{key} = {v:.6f}")
        if self.per_class_acc is not None:
            for i, v in enumerate(self.per_class_acc):
                lines.append(f"metrics.class_acc.{i} = {v:.6f}")
        if self.per_part_iou is not None:
            for i, v in enumerate(self.per_part_iou):
                lines.append(f"metrics.part_iou.{i} = {v:.6f}")
        for k in sorted(self.extras):
            lines.append(f"extras.{k} = {self.extras[k]:.6f}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_document(cls, text: str) -> "MetricsReport":
        rep = cls()
        class_acc: dict[int, float] = {}
        part_iou: dict[int, float] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, val = (p.strip() for p in line.split("=", 1))
            if key == "report.stage":
                rep.stage = val
            elif key == "report.epoch":
                rep.epoch = int(val)
            elif key.startswith("metrics.class_acc."):
                class_acc[int(key.rsplit(".", 1)[1])] = float(val)
            elif key.startswith("metrics.part_iou."):
                part_iou[int(key.rsplit(".", 1)[1])] = float(val)
            elif key.startswith("metrics."):
                setattr(rep, key.split(".", 1)[1], float(val))
            elif key.startswith("extras."):
                rep.extras[key.split(".", 1)[1]] = float(val)
        if class_acc:
            rep.per_class_acc = [class_acc[i] for i in sorted(class_acc)]
        if part_iou:
            rep.per_part_iou = [part_iou[i] for i in sorted(part_iou)]
        return rep
