"""Dense float64 tensors, the gradient tape, and named parameters.

Everything differentiable in this package flows through here: ops (see
:mod:`fusionsort.ops`) compute eagerly on numpy float64 buffers and, when a
:class:`GradTape` is active, append a record with a backward rule.  Replaying
the records in reverse yields reverse-mode gradients for every tensor
reachable from the loss.

float64 is deliberate: the test suite leans on central finite differences,
and float32 noise would drown the signal.
"""

from __future__ import annotations

from collections import Counter
from typing import Callable, Sequence

import numpy as np

from .errors import NumericsError, ShapeError

# Backward rules of op names listed here get their produced gradients
# perturbed during tape replay.  Test hook for the gradcheck CLI's
# --sabotage flag; empty in normal operation.
SABOTAGED_OPS: set[str] = set()


class Tensor:
    """A dense N-dimensional array of float64 values.

    Segmentation tensors use (batch, channel, height, width) order.  The
    buffer is always C-contiguous, every extent is >= 1, and the values are
    finite; violations raise at construction time.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if any(d < 1 for d in arr.shape):
            raise ShapeError(f"tensor extents must all be >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericsError("tensor data contains NaN or Inf")
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class Parameter:
    """A named, trainable tensor with an accumulated gradient of equal shape.

    Names are dotted paths (e.g. ``decoder.ca.conv_x.weight``) and must be
    unique within a network; checkpoints order parameters lexicographically
    by name.
    """

    __slots__ = ("name", "value", "gradient")

    def __init__(self, name: str, value):
        self.name = name
        self.value = value if isinstance(value, Tensor) else Tensor(value)
        self.gradient = Tensor(np.zeros_like(self.value.data))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.gradient.data[...] = 0.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class _Record:
    __slots__ = ("name", "inputs", "output", "backward")

    def __init__(self, name, inputs, output, backward):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.backward = backward


_TAPE_STACK: list["GradTape"] = []


def active_tape() -> "GradTape | None":
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class GradTape:
    """Ordered record of executed primitive ops with their backward rules.

    Use as a context manager around the forward computation, then call
    :meth:`backward` on the scalar loss.  Gradients are keyed by tensor
    identity and have the same shape as the tensor they belong to.  One tape
    is single-threaded; independent tapes may run in parallel.
    """

    def __init__(self):
        self.records: list[_Record] = []
        self._grads: dict[int, np.ndarray] = {}

    def __enter__(self) -> "GradTape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self, "GradTape contexts must nest properly"
        return False

    def record(self, name: str, inputs: Sequence[Tensor], output: Tensor,
               backward: Callable[[np.ndarray], tuple]) -> None:
        self.records.append(_Record(name, tuple(inputs), output, backward))

    def op_counts(self) -> Counter:
        """How many times each primitive op was recorded."""
        return Counter(rec.name for rec in self.records)

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) for every tensor reachable from loss."""
        if loss.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for rec in reversed(self.records):
            g_out = grads.get(id(rec.output))
            if g_out is None:
                continue
            in_grads = rec.backward(g_out)
            if rec.name in SABOTAGED_OPS:
                in_grads = tuple(None if g is None else g * 1.01 for g in in_grads)
            for tensor, g in zip(rec.inputs, in_grads):
                if g is None:
                    continue
                if g.shape != tensor.data.shape:
                    raise ShapeError(
                        f"backward rule for '{rec.name}' produced gradient of shape "
                        f"{g.shape} for input of shape {tensor.data.shape}")
                key = id(tensor)
                acc = grads.get(key)
                grads[key] = g.copy() if acc is None else acc + g
        self._grads = grads

    def grad(self, tensor: Tensor) -> np.ndarray | None:
        """Gradient accumulated for `tensor` by the last backward(), if any."""
        return self._grads.get(id(tensor))

    def accumulate_into(self, params: Sequence[Parameter]) -> None:
        """Add the tape's gradients onto each parameter's .gradient buffer."""
        for p in params:
            g = self._grads.get(id(p.value))
            if g is not None:
                p.gradient.data += g
