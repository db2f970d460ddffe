"""Soft Dice loss, cross-entropy loss, and their weighted combination.

Both losses consume raw logits [N, K, H, W] and integer class targets, take
the softmax internally, and register a single tape record with a
closed-form backward rule.  Dice averages over all K classes, absent ones
included; the eps smoothing keeps absent-class terms finite and near zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError, LabelError, ShapeError
from .tensor import Tensor, active_tape


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError(f"loss weights must be non-negative, got {self}")
        if self.alpha == 0 and self.beta == 0:
            raise ConfigError("loss weights must not both be zero")


def _labels_array(target, num_classes: int, spatial: tuple[int, ...]) -> np.ndarray:
    """Normalize a LabelMask or integer array to int64 [N, H, W] and validate."""
    data = getattr(target, "data", target)
    arr = np.asarray(data)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape != spatial:
        raise ShapeError(f"target shape {arr.shape} does not match logits spatial {spatial}")
    arr = arr.astype(np.int64)
    if arr.min() < 0 or arr.max() >= num_classes:
        raise LabelError(
            f"target contains class {int(arr.max())} outside [0, {num_classes})")
    return arr


def _softmax_channels(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    n, h, w = labels.shape
    g = np.zeros((n, num_classes, h, w))
    np.put_along_axis(g, labels[:, None], 1.0, axis=1)
    return g


def dice_loss(logits: Tensor, target, eps: float = 1e-5) -> Tensor:
    """1 - mean soft Dice coefficient over all classes."""
    if logits.ndim != 4:
        raise ShapeError("dice_loss expects [N, K, H, W] logits")
    n, k, h, w = logits.shape
    labels = _labels_array(target, k, (n, h, w))
    p = _softmax_channels(logits.data)
    g = _one_hot(labels, k)
    inter = (p * g).sum(axis=(0, 2, 3))
    p_sum = p.sum(axis=(0, 2, 3))
    g_sum = g.sum(axis=(0, 2, 3))
    denom = p_sum + g_sum + eps
    per_class = 1.0 - (2.0 * inter + eps) / denom
    loss = np.float64(per_class.mean())

    def backward(g_up):
        # d(loss)/dp_k(x) = (a_k * onehot_k(x) + b_k) / K, then through the
        # per-pixel softmax jacobian.
        a = -2.0 / denom / k
        b = (2.0 * inter + eps) / denom ** 2 / k
        dl_dp = a[None, :, None, None] * g + b[None, :, None, None]
        s = (dl_dp * p).sum(axis=1, keepdims=True)
        return (np.asarray(g_up).item() * p * (dl_dp - s),)

    out = Tensor(loss)
    tape = active_tape()
    if tape is not None:
        tape.record("dice_loss", (logits,), out, backward)
    return out


def cross_entropy_loss(logits: Tensor, target) -> Tensor:
    """Mean negative log softmax probability of the target class."""
    if logits.ndim != 4:
        raise ShapeError("cross_entropy_loss expects [N, K, H, W] logits")
    n, k, h, w = logits.shape
    labels = _labels_array(target, k, (n, h, w))
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    z_target = np.take_along_axis(z, labels[:, None], axis=1)[:, 0]
    count = n * h * w
    loss = np.float64((lse - z_target).sum() / count)

    def backward(g_up):
        grad = _softmax_channels(z) - _one_hot(labels, k)
        return (np.asarray(g_up).item() / count * grad,)

    out = Tensor(loss)
    tape = active_tape()
    if tape is not None:
        tape.record("cross_entropy", (logits,), out, backward)
    return out


def combined_loss(logits: Tensor, target, weights: LossWeights = LossWeights(),
                  eps: float = 1e-5) -> Tensor:
    """alpha * dice + beta * cross-entropy; linear in the weights."""
    return ops.add(ops.scale(dice_loss(logits, target, eps), weights.alpha),
                   ops.scale(cross_entropy_loss(logits, target), weights.beta))
