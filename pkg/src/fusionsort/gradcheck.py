"""Finite-difference verification of analytic gradients.

The checker perturbs every coordinate of every parameter, so callers keep
the configurations tiny.  Batch-norm layers must be switched to eval mode
first: a finite difference through batch statistics would probe a different
function than the one the tape differentiated.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericsError
from .tensor import GradTape, Parameter, Tensor


def grad_check(f: Callable[[], Tensor], params: Sequence[Parameter],
               eps: float = 1e-5) -> float:
    """Compare tape gradients of a scalar function against central differences.

    `f` must be deterministic and depend on `params` only through their
    current values.  Returns the maximum relative error
    |a - n| / max(1e-8, |a| + |n|) over every coordinate of every parameter,
    where a is the tape gradient and n = (f(p+eps) - f(p-eps)) / (2 eps).
    """
    if eps <= 0.0:
        raise ConfigError(f"grad_check eps must be positive, got {eps}")

    with GradTape() as tape:
        loss = f()
    tape.backward(loss)

    worst = 0.0
    for p in params:
        analytic = tape.grad(p.value)
        if analytic is None:
            analytic = np.zeros_like(p.value.data)
        flat = p.value.data.reshape(-1)
        a_flat = analytic.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            try:
                plus = f().item()
            except NumericsError as exc:
                flat[i] = saved
                raise NumericsError(
                    f"non-finite loss while perturbing parameter '{p.name}'") from exc
            flat[i] = saved - eps
            try:
                minus = f().item()
            except NumericsError as exc:
                flat[i] = saved
                raise NumericsError(
                    f"non-finite loss while perturbing parameter '{p.name}'") from exc
            flat[i] = saved
            numeric = (plus - minus) / (2.0 * eps)
            rel = abs(a_flat[i] - numeric) / max(1e-8, abs(a_flat[i]) + abs(numeric))
            if rel > worst:
                worst = rel
    return worst
