"""Parameterized layers built on the primitive ops.

A Module owns Parameters (trainable), buffers (state saved to checkpoints
but never optimized, e.g. batch-norm running statistics), and child
modules.  Registration order is construction order, which together with a
seeded rng makes initialization deterministic.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .errors import ConfigError
from .tensor import Parameter, Tensor


class Module:
    def __init__(self, name: str):
        self.name = name
        self.training = True
        self._params: list[Parameter] = []
        self._buffers: list[Parameter] = []
        self._children: list["Module"] = []

    def add_param(self, suffix: str, value: np.ndarray) -> Parameter:
        p = Parameter(f"{self.name}.{suffix}", value)
        self._params.append(p)
        return p

    def add_buffer(self, suffix: str, value: np.ndarray) -> Parameter:
        b = Parameter(f"{self.name}.{suffix}", value)
        self._buffers.append(b)
        return b

    def add_child(self, child: "Module") -> "Module":
        self._children.append(child)
        return child

    def parameters(self) -> list[Parameter]:
        """Trainable parameters of this module and its children, in order."""
        out = list(self._params)
        for c in self._children:
            out.extend(c.parameters())
        return out

    def buffers(self) -> list[Parameter]:
        out = list(self._buffers)
        for c in self._children:
            out.extend(c.buffers())
        return out

    def state_entries(self) -> list[Parameter]:
        """Everything a checkpoint must persist: parameters plus buffers."""
        return self.parameters() + self.buffers()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def set_training(self, flag: bool) -> None:
        self.training = flag
        for c in self._children:
            c.set_training(flag)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def _normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return rng.normal(0.0, 0.02, size=shape)


class Conv2d(Module):
    def __init__(self, name: str, in_channels: int, out_channels: int,
                 kernel_size: int, rng: np.random.Generator, stride: int = 1,
                 padding: int = 0, groups: int = 1, bias: bool = True):
        super().__init__(name)
        if in_channels % groups or out_channels % groups:
            raise ConfigError(
                f"{name}: channels ({in_channels} -> {out_channels}) not divisible by groups {groups}")
        self.stride = stride
        self.padding = padding
        self.groups = groups
        self.weight = self.add_param(
            "weight", _normal(rng, (out_channels, in_channels // groups,
                                    kernel_size, kernel_size)))
        self.bias = self.add_param("bias", np.zeros(out_channels)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.conv2d(x, self.weight.value, self.stride, self.padding, self.groups)
        if self.bias is not None:
            out = ops.bias_nchw(out, self.bias.value)
        return out


class BatchNorm2d(Module):
    def __init__(self, name: str, channels: int, eps: float = 1e-5,
                 momentum: float = 0.1):
        super().__init__(name)
        self.eps = eps
        self.momentum = momentum
        self.gamma = self.add_param("gamma", np.ones(channels))
        self.beta = self.add_param("beta", np.zeros(channels))
        self.running_mean = self.add_buffer("running_mean", np.zeros(channels))
        self.running_var = self.add_buffer("running_var", np.ones(channels))

    def __call__(self, x: Tensor) -> Tensor:
        if self.training:
            out, mean, var = ops.batch_norm_train(
                x, self.gamma.value, self.beta.value, self.eps)
            m = self.momentum
            self.running_mean.value.data[...] = \
                (1.0 - m) * self.running_mean.value.data + m * mean
            self.running_var.value.data[...] = \
                (1.0 - m) * self.running_var.value.data + m * var
            return out
        return ops.batch_norm_eval(
            x, self.gamma.value, self.beta.value,
            self.running_mean.value.data, self.running_var.value.data, self.eps)


class LayerNormSeq(Module):
    """Layer norm over the channel axis of a [B, L, D] sequence."""

    def __init__(self, name: str, dim: int, eps: float = 1e-5):
        super().__init__(name)
        self.eps = eps
        self.gamma = self.add_param("gamma", np.ones(dim))
        self.beta = self.add_param("beta", np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma.value, self.beta.value, self.eps)


class Linear(Module):
    """Pointwise linear map over the channel axis of a [B, L, D] sequence."""

    def __init__(self, name: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator, bias: bool = True):
        super().__init__(name)
        self.weight = self.add_param("weight", _normal(rng, (in_dim, out_dim)))
        self.bias = self.add_param("bias", np.zeros(out_dim)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.matmul_seq(x, self.weight.value)
        if self.bias is not None:
            out = ops.add(out, self.bias.value)
        return out
