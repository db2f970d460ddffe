"""The comprehensive attention block and its two paths.

Path one is coordinate attention: directional average pooling produces
per-row and per-column descriptors, a shared bottleneck conv mixes them,
and two sigmoid heads emit separable gates multiplied back onto the input.

Path two is a Mamba-style selective state-space block over the spatial
raster flattened to a sequence in row-major order.

The block merges whichever paths are enabled through per-path 1x1 channel
reduction convs and a softmax-weighted sum, then applies batch norm and
SiLU.  With both paths off it degrades to identity + norm + activation.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .errors import ConfigError
from .layers import BatchNorm2d, Conv2d, LayerNormSeq, Linear, Module
from .tensor import Tensor


class CoordAttention(Module):
    def __init__(self, name: str, channels: int, reduction: int,
                 rng: np.random.Generator):
        super().__init__(name)
        if reduction < 1 or channels % reduction:
            raise ConfigError(
                f"{name}: channels {channels} not divisible by reduction {reduction}")
        mid = channels // reduction
        self.shared = self.add_child(Conv2d(f"{name}.shared", channels, mid, 1, rng))
        self.bn = self.add_child(BatchNorm2d(f"{name}.bn", mid))
        self.conv_x = self.add_child(Conv2d(f"{name}.conv_x", mid, channels, 1, rng))
        self.conv_y = self.add_child(Conv2d(f"{name}.conv_y", mid, channels, 1, rng))

    def __call__(self, x: Tensor) -> Tensor:
        h, w = x.shape[2], x.shape[3]
        pooled_x = ops.avg_pool_x(x)                              # [N, C, H, 1]
        pooled_y = ops.transpose(ops.avg_pool_y(x), (0, 1, 3, 2))  # [N, C, W, 1]
        joint = ops.concat((pooled_x, pooled_y), axis=2)          # [N, C, H+W, 1]
        mixed = ops.silu(self.bn(self.shared(joint)))
        part_x = ops.slice_axis(mixed, 2, 0, h)
        part_y = ops.transpose(ops.slice_axis(mixed, 2, h, h + w), (0, 1, 3, 2))
        gate_x = ops.sigmoid(self.conv_x(part_x))                 # [N, C, H, 1]
        gate_y = ops.sigmoid(self.conv_y(part_y))                 # [N, C, 1, W]
        return ops.mul(ops.mul(x, gate_x), gate_y)


class MambaBlock(Module):
    """Pre-norm selective SSM over the row-major flattened spatial sequence."""

    def __init__(self, name: str, channels: int, state_dim: int,
                 conv_width: int, rng: np.random.Generator):
        super().__init__(name)
        if state_dim < 1 or conv_width < 1:
            raise ConfigError(
                f"{name}: state_dim {state_dim} and conv_width {conv_width} must be >= 1")
        self.d_inner = 2 * channels
        self.norm = self.add_child(LayerNormSeq(f"{name}.norm", channels))
        self.in_proj = self.add_child(
            Linear(f"{name}.in_proj", channels, 2 * self.d_inner, rng))
        self.conv_weight = self.add_param(
            "conv_weight", rng.normal(0.0, 0.02, size=(self.d_inner, conv_width)))
        self.conv_bias = self.add_param("conv_bias", np.zeros(self.d_inner))
        self.delta_proj = self.add_child(
            Linear(f"{name}.delta_proj", self.d_inner, self.d_inner, rng))
        self.b_proj = self.add_child(
            Linear(f"{name}.b_proj", self.d_inner, state_dim, rng, bias=False))
        self.c_proj = self.add_child(
            Linear(f"{name}.c_proj", self.d_inner, state_dim, rng, bias=False))
        # A = -exp(a_log) keeps every decay rate strictly negative; the
        # init spreads rates 1..N across the state axis.
        self.a_log = self.add_param(
            "a_log", np.tile(np.log(np.arange(1, state_dim + 1, dtype=np.float64)),
                             (self.d_inner, 1)))
        self.d_skip = self.add_param("d_skip", np.ones(self.d_inner))
        self.out_proj = self.add_child(
            Linear(f"{name}.out_proj", self.d_inner, channels, rng))

    def __call__(self, x: Tensor) -> Tensor:
        n, c, h, w = x.shape
        seq = ops.reshape(ops.transpose(x, (0, 2, 3, 1)), (n, h * w, c))
        normed = self.norm(seq)
        proj = self.in_proj(normed)                          # [N, L, 4C]
        u = ops.slice_axis(proj, 2, 0, self.d_inner)
        gate = ops.slice_axis(proj, 2, self.d_inner, 2 * self.d_inner)
        u = ops.add(ops.dwconv1d(u, self.conv_weight.value), self.conv_bias.value)
        u = ops.silu(u)
        delta = ops.softplus(self.delta_proj(u))             # > 0 by construction
        b_seq = self.b_proj(u)
        c_seq = self.c_proj(u)
        a = ops.scale(ops.exp(self.a_log.value), -1.0)
        y = ops.ssm_scan(u, delta, a, b_seq, c_seq, self.d_skip.value)
        y = ops.mul(y, ops.silu(gate))
        out = self.out_proj(y)
        out = ops.transpose(ops.reshape(out, (n, h, w, c)), (0, 3, 1, 2))
        return ops.add(x, out)


class ComprehensiveAttention(Module):
    """Parallel attention paths merged by channel reduction and weighted fusion."""

    def __init__(self, name: str, channels: int, use_conv_path: bool,
                 use_mamba_path: bool, use_weighted_fusion: bool,
                 reduction: int, state_dim: int, conv_width: int,
                 rng: np.random.Generator):
        super().__init__(name)
        if use_weighted_fusion and not (use_conv_path or use_mamba_path):
            raise ConfigError(
                f"{name}: weighted fusion requires at least one attention path")
        self.use_conv_path = use_conv_path
        self.use_mamba_path = use_mamba_path
        self.use_weighted_fusion = use_weighted_fusion
        if use_conv_path:
            self.coord = self.add_child(
                CoordAttention(f"{name}.coord", channels, reduction, rng))
            self.reduce_conv = self.add_child(
                Conv2d(f"{name}.reduce_conv", channels, channels, 1, rng))
        if use_mamba_path:
            self.mamba = self.add_child(
                MambaBlock(f"{name}.mamba", channels, state_dim, conv_width, rng))
            self.reduce_mamba = self.add_child(
                Conv2d(f"{name}.reduce_mamba", channels, channels, 1, rng))
        if use_weighted_fusion:
            # Raw (conv, mamba) pair; a disabled path's entry is dropped
            # before the softmax, so the weights over live paths sum to 1.
            self.fusion_raw = self.add_param("fusion_raw", np.zeros(2))
        self.bn = self.add_child(BatchNorm2d(f"{name}.bn", channels))

    def __call__(self, x: Tensor) -> Tensor:
        paths: list[Tensor] = []
        raw_index: list[int] = []
        if self.use_conv_path:
            paths.append(self.reduce_conv(self.coord(x)))
            raw_index.append(0)
        if self.use_mamba_path:
            paths.append(self.reduce_mamba(self.mamba(x)))
            raw_index.append(1)
        if not paths:
            merged = x
        elif self.use_weighted_fusion:
            raw = self.fusion_raw.value
            if len(paths) < 2:
                raw = ops.slice_axis(raw, 0, raw_index[0], raw_index[0] + 1)
            weights = ops.softmax(raw, axis=0)
            merged = None
            for i, p in enumerate(paths):
                w_i = ops.reshape(ops.slice_axis(weights, 0, i, i + 1), (1, 1, 1, 1))
                term = ops.mul(p, w_i)
                merged = term if merged is None else ops.add(merged, term)
        elif len(paths) == 1:
            merged = paths[0]
        else:
            merged = ops.scale(ops.add(paths[0], paths[1]), 1.0 / len(paths))
        return ops.silu(self.bn(merged))
