"""Toy training loop: per-image steps, AdamW, polynomial learning-rate decay.

Steps walk the dataset in a fixed cyclic order so runs are deterministic
given the seed that built the network and the data.  The optimizer applies
decoupled weight decay (parameter shrink before the Adam step) and the
schedule lr_t = lr * (1 - t/T)^power with t counted from zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericsError
from .losses import LossWeights, combined_loss
from .metrics import SegmentationReport, confusion_matrix, report_from_confusion
from .network import Network
from .tensor import GradTape, Parameter, Tensor


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    iterations: int = 300
    poly_power: float = 0.9
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        LossWeights(self.alpha, self.beta)  # same invariant, same error


class AdamW:
    """Adam with decoupled weight decay and bias-corrected moments."""

    def __init__(self, params: list[Parameter], tc: TrainConfig, eps: float = 1e-8):
        self.params = params
        self.tc = tc
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.value.data) for p in params]
        self.v = [np.zeros_like(p.value.data) for p in params]

    def step(self, lr_t: float) -> None:
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.tc.beta1, self.tc.beta2
        for i, p in enumerate(self.params):
            g = p.gradient.data
            p.value.data *= 1.0 - lr_t * self.tc.weight_decay
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1 ** t)
            v_hat = self.v[i] / (1.0 - b2 ** t)
            p.value.data -= lr_t * m_hat / (np.sqrt(v_hat) + self.eps)


def poly_lr(base: float, step: int, total: int, power: float) -> float:
    return base * (1.0 - step / total) ** power


def train_toy(network: Network, dataset: list[tuple[Tensor, object]],
              tc: TrainConfig) -> list[float]:
    """Overfit the network on a small dataset; returns the loss history."""
    if not dataset:
        raise ConfigError("dataset must be nonempty")
    params = network.parameters()
    optimizer = AdamW(params, tc)
    weights = LossWeights(tc.alpha, tc.beta)
    history: list[float] = []
    network.set_training(True)
    for step in range(tc.iterations):
        image, mask = dataset[step % len(dataset)]
        try:
            with GradTape() as tape:
                logits = network.forward(image)
                loss = combined_loss(logits, mask, weights)
            tape.backward(loss)
        except NumericsError as exc:
            raise NumericsError(f"non-finite loss at step {step}") from exc
        network.zero_grad()
        tape.accumulate_into(params)
        optimizer.step(poly_lr(tc.learning_rate, step, tc.iterations, tc.poly_power))
        history.append(loss.item())
    return history


def evaluate_dataset(network: Network,
                     dataset: list[tuple[Tensor, object]]) -> SegmentationReport:
    """Pooled eval-mode metrics over a dataset (confusion counts summed)."""
    k = network.config.num_classes
    pooled = np.zeros((k, k), dtype=np.int64)
    for image, mask in dataset:
        pred = network.predict(image)
        pooled += confusion_matrix(pred, mask, k)
    return report_from_confusion(pooled)
