"""The toy segmentation network: small encoder, attention decoder, head.

The encoder is two strided conv stages giving features at 1/2 and 1/4
resolution.  The decoder upsamples the deep feature, merges it with the
1/2-resolution skip, runs the comprehensive attention block per the config
flags, and projects to class logits at full resolution.  Activation is
ReLU on the conv/upsampling path and SiLU inside attention blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .attention import ComprehensiveAttention
from .errors import ConfigError, ShapeError
from .formats import LabelMask
from .layers import BatchNorm2d, Conv2d, Module
from .tensor import Tensor

ABLATION_NAMES = ("baseline", "mamba", "ca", "wf", "all")


@dataclass(frozen=True)
class NetworkConfig:
    in_channels: int = 6
    num_classes: int = 3
    widths: tuple[int, int] = (16, 32)
    use_comprehensive_attention: bool = True
    use_mamba: bool = True
    use_weighted_fusion: bool = True
    reduction: int = 4
    state_dim: int = 4
    conv_width: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.in_channels < 1:
            raise ConfigError(f"in_channels must be >= 1, got {self.in_channels}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if len(self.widths) != 2 or any(w < 1 for w in self.widths):
            raise ConfigError(f"widths must be two positive values, got {self.widths}")
        if self.use_weighted_fusion and not (
                self.use_comprehensive_attention or self.use_mamba):
            raise ConfigError(
                "weighted fusion requires at least one attention path enabled")
        if self.use_comprehensive_attention and (
                self.reduction < 1 or self.widths[0] % self.reduction):
            raise ConfigError(
                f"width {self.widths[0]} not divisible by reduction {self.reduction}")
        if self.state_dim < 1 or self.conv_width < 1:
            raise ConfigError(
                f"state_dim {self.state_dim} and conv_width {self.conv_width} must be >= 1")


def ablation_config(name: str, **overrides) -> NetworkConfig:
    """Map an ablation row name to its flag combination.

    The weighted-fusion row keeps the convolutional attention path enabled,
    since fusion weights need at least one path to weight.
    """
    flags = {
        "baseline": (False, False, False),
        "mamba": (False, True, False),
        "ca": (True, False, False),
        "wf": (True, False, True),
        "all": (True, True, True),
    }
    if name not in flags:
        raise ConfigError(f"unknown ablation {name!r}; choose from {ABLATION_NAMES}")
    ca, mamba, wf = flags[name]
    return NetworkConfig(use_comprehensive_attention=ca, use_mamba=mamba,
                         use_weighted_fusion=wf, **overrides)


class Network(Module):
    def __init__(self, cfg: NetworkConfig):
        super().__init__("net")
        self.config = cfg
        w0, w1 = cfg.widths
        rng = np.random.default_rng(cfg.seed)
        self.enc1_conv = self.add_child(
            Conv2d("net.enc1.conv", cfg.in_channels, w0, 3, rng, stride=2, padding=1))
        self.enc1_bn = self.add_child(BatchNorm2d("net.enc1.bn", w0))
        self.enc2_conv = self.add_child(
            Conv2d("net.enc2.conv", w0, w1, 3, rng, stride=2, padding=1))
        self.enc2_bn = self.add_child(BatchNorm2d("net.enc2.bn", w1))
        self.up_conv = self.add_child(
            Conv2d("net.up.conv", w1, w0, 3, rng, padding=1))
        self.up_bn = self.add_child(BatchNorm2d("net.up.bn", w0))
        self.merge_conv = self.add_child(
            Conv2d("net.merge.conv", 2 * w0, w0, 1, rng))
        self.attention = self.add_child(ComprehensiveAttention(
            "net.attn", w0, cfg.use_comprehensive_attention, cfg.use_mamba,
            cfg.use_weighted_fusion, cfg.reduction, cfg.state_dim,
            cfg.conv_width, rng))
        self.head = self.add_child(Conv2d("net.head", w0, cfg.num_classes, 1, rng))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeError(
                f"input shape {x.shape} does not match {self.config.in_channels} channels")
        h, w = x.shape[2], x.shape[3]
        if h % 4 or w % 4:
            raise ShapeError(f"spatial extents {h}x{w} must be divisible by 4")
        f1 = ops.relu(self.enc1_bn(self.enc1_conv(x)))        # 1/2 res, w0
        f2 = ops.relu(self.enc2_bn(self.enc2_conv(f1)))       # 1/4 res, w1
        up = ops.bilinear_resize(f2, h // 2, w // 2)
        up = ops.relu(self.up_bn(self.up_conv(up)))           # 1/2 res, w0
        merged = self.merge_conv(ops.concat_channels(up, f1))
        attended = self.attention(merged)
        full = ops.bilinear_resize(attended, h, w)
        return self.head(full)

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def predict(self, x: Tensor) -> LabelMask:
        """Eval-mode forward and per-pixel argmax (ties to the smaller index)."""
        was_training = self.training
        self.set_training(False)
        logits = self.forward(x)
        self.set_training(was_training)
        return LabelMask(np.argmax(logits.data[0], axis=0).astype(np.uint8))


def build_network(cfg: NetworkConfig) -> Network:
    return Network(cfg)
