"""Segmentation metrics through a pooled confusion matrix.

Counts pool additively, so a dataset is evaluated by summing per-image
matrices before computing IoU.  Classes absent from both prediction and
ground truth carry no IoU and are excluded from the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabelError, ShapeError


@dataclass
class SegmentationReport:
    num_classes: int
    confusion: np.ndarray             # [K, K], rows = ground truth, cols = prediction
    per_class_iou: list[float | None]  # None when the class is absent from both masks
    miou: float
    pixel_accuracy: float

    def text_lines(self) -> list[str]:
        lines = []
        for k, iou in enumerate(self.per_class_iou):
            shown = "absent" if iou is None else f"{iou:.6f}"
            lines.append(f"class_{k}_iou={shown}")
        lines.append(f"miou={self.miou:.6f}")
        lines.append(f"pixel_accuracy={self.pixel_accuracy:.6f}")
        return lines


def _mask_array(mask, num_classes: int) -> np.ndarray:
    data = getattr(mask, "data", mask)
    arr = np.asarray(data).astype(np.int64)
    if arr.ndim != 2:
        raise ShapeError(f"mask must be 2-D, got shape {arr.shape}")
    if arr.min() < 0 or arr.max() >= num_classes:
        raise LabelError(
            f"mask contains class {int(arr.max())} outside [0, {num_classes})")
    return arr


def confusion_matrix(pred, gt, num_classes: int) -> np.ndarray:
    p = _mask_array(pred, num_classes)
    g = _mask_array(gt, num_classes)
    if p.shape != g.shape:
        raise ShapeError(f"mask shapes differ: {p.shape} vs {g.shape}")
    flat = g.reshape(-1) * num_classes + p.reshape(-1)
    counts = np.bincount(flat, minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes)


def report_from_confusion(cm: np.ndarray) -> SegmentationReport:
    k = cm.shape[0]
    total = int(cm.sum())
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    ious: list[float | None] = []
    present = []
    for i in range(k):
        union = tp[i] + fp[i] + fn[i]
        if union == 0:
            ious.append(None)
        else:
            iou = tp[i] / union
            ious.append(float(iou))
            present.append(iou)
    miou = float(np.mean(present)) if present else 0.0
    accuracy = float(tp.sum() / total) if total else 0.0
    return SegmentationReport(k, cm, ious, miou, accuracy)


def evaluate(pred, gt, num_classes: int) -> SegmentationReport:
    return report_from_confusion(confusion_matrix(pred, gt, num_classes))
