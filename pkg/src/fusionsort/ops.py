"""Primitive differentiable operations.

Each function computes eagerly on numpy buffers and, when a tape is active,
records a backward closure.  Backward rules return one gradient per input,
in input order, with None for inputs that receive no gradient.  Image
tensors are (batch, channel, height, width); sequence tensors are
(batch, length, channel).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import NumericsError, ShapeError
from .tensor import Tensor, active_tape


def _emit(name, inputs, out_data, backward) -> Tensor:
    out = Tensor(out_data)
    tape = active_tape()
    if tape is not None:
        tape.record(name, inputs, out, backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the pre-broadcast shape."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _emit("add", (a, b), a.data + b.data, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return _emit("mul", (a, b), a.data * b.data, backward)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def backward(g):
        return (g * s,)
    return _emit("scale", (a,), a.data * s, backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0

    def backward(g):
        return (g * mask,)
    return _emit("relu", (a,), np.where(mask, a.data, 0.0), backward)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign so neither branch exponentiates a large positive value.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)

    def backward(g):
        return (g * s * (1.0 - s),)
    return _emit("sigmoid", (a,), s, backward)


def silu(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)

    def backward(g):
        return (g * s * (1.0 + a.data * (1.0 - s)),)
    return _emit("silu", (a,), a.data * s, backward)


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)

    def backward(g):
        return (g * e,)
    return _emit("exp", (a,), e, backward)


def softplus(a: Tensor) -> Tensor:
    def backward(g):
        return (g * _sigmoid(a.data),)
    return _emit("softplus", (a,), np.logaddexp(0.0, a.data), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return ((g - dot) * y,)
    return _emit("softmax", (a,), y, backward)


# ---------------------------------------------------------------------------
# shape


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    def backward(g):
        return (g.reshape(a.shape),)
    return _emit("reshape", (a,), a.data.reshape(shape), backward)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inv = tuple(np.argsort(axes))

    def backward(g):
        return (np.ascontiguousarray(g.transpose(inv)),)
    return _emit("transpose", (a,), np.ascontiguousarray(a.data.transpose(axes)), backward)


def concat(tensors: list[Tensor] | tuple[Tensor, ...], axis: int) -> Tensor:
    tensors = tuple(tensors)
    widths = [t.shape[axis] for t in tensors]

    def backward(g):
        splits = np.split(g, np.cumsum(widths)[:-1], axis=axis)
        return tuple(np.ascontiguousarray(s) for s in splits)
    return _emit("concat", tensors, np.concatenate([t.data for t in tensors], axis=axis), backward)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 4 or b.ndim != 4:
        raise ShapeError("concat_channels expects two NCHW tensors")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(
            f"concat_channels needs matching batch and spatial extents, got {a.shape} and {b.shape}")
    return concat((a, b), axis=1)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g):
        full = np.zeros(a.shape)
        full[index] = g
        return (full,)
    return _emit("slice", (a,), np.ascontiguousarray(a.data[index]), backward)


# ---------------------------------------------------------------------------
# reductions and pooling


def mean_all(a: Tensor) -> Tensor:
    inv = 1.0 / a.size

    def backward(g):
        return (np.full(a.shape, np.asarray(g).item() * inv),)
    return _emit("mean_all", (a,), np.float64(a.data.mean()), backward)


def avg_pool_x(a: Tensor) -> Tensor:
    """Mean over the width axis: NCHW -> [N, C, H, 1]."""
    if a.ndim != 4:
        raise ShapeError("avg_pool_x expects an NCHW tensor")
    inv = 1.0 / a.shape[3]

    def backward(g):
        return (np.broadcast_to(g * inv, a.shape).copy(),)
    return _emit("avg_pool_x", (a,), a.data.mean(axis=3, keepdims=True), backward)


def avg_pool_y(a: Tensor) -> Tensor:
    """Mean over the height axis: NCHW -> [N, C, 1, W]."""
    if a.ndim != 4:
        raise ShapeError("avg_pool_y expects an NCHW tensor")
    inv = 1.0 / a.shape[2]

    def backward(g):
        return (np.broadcast_to(g * inv, a.shape).copy(),)
    return _emit("avg_pool_y", (a,), a.data.mean(axis=2, keepdims=True), backward)


# ---------------------------------------------------------------------------
# linear algebra


def matmul_seq(x: Tensor, w: Tensor) -> Tensor:
    """[B, L, D] @ [D, E] -> [B, L, E]."""
    if x.ndim != 3 or w.ndim != 2 or x.shape[2] != w.shape[0]:
        raise ShapeError(f"matmul_seq got shapes {x.shape} and {w.shape}")
    b, ln, d = x.shape
    x2 = x.data.reshape(b * ln, d)
    out = (x2 @ w.data).reshape(b, ln, w.shape[1])

    def backward(g):
        g2 = g.reshape(b * ln, w.shape[1])
        return (g2 @ w.data.T).reshape(x.shape), x2.T @ g2
    return _emit("matmul_seq", (x, w), out, backward)


# ---------------------------------------------------------------------------
# convolution and normalization


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0,
           groups: int = 1) -> Tensor:
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError("conv2d expects NCHW input and OIHW weight")
    n, c_in, h, wd = x.shape
    c_out, c_g, kh, kw = w.shape
    if c_in % groups or c_out % groups or c_g != c_in // groups:
        raise ShapeError(
            f"conv2d group mismatch: input {c_in} channels, weight {w.shape}, groups {groups}")
    if h + 2 * padding < kh or wd + 2 * padding < kw:
        raise ShapeError(f"conv2d kernel {kh}x{kw} exceeds padded input {h}x{wd}")
    out = _kernels.conv2d_forward(x.data, w.data, stride, padding, groups)

    def backward(g):
        g = np.ascontiguousarray(g)
        g_x = _kernels.conv2d_backward_input(g, w.data, h, wd, stride, padding, groups)
        g_w = _kernels.conv2d_backward_weight(g, x.data, kh, kw, stride, padding, groups)
        return np.asarray(g_x), np.asarray(g_w)
    return _emit("conv2d", (x, w), out, backward)


def bias_nchw(x: Tensor, b: Tensor) -> Tensor:
    """Add a per-channel bias [C] to an NCHW tensor."""
    if b.ndim != 1 or b.shape[0] != x.shape[1]:
        raise ShapeError(f"bias of shape {b.shape} does not match {x.shape[1]} channels")

    def backward(g):
        return g, g.sum(axis=(0, 2, 3))
    return _emit("bias_nchw", (x, b), x.data + b.data[None, :, None, None], backward)


def batch_norm_train(x: Tensor, gamma: Tensor, beta: Tensor,
                     eps: float = 1e-5) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Batch normalization using batch statistics (population variance).

    Returns the normalized tensor plus the batch mean and variance as plain
    arrays so the calling layer can update its running estimates.
    """
    if x.ndim != 4:
        raise ShapeError("batch_norm expects an NCHW tensor")
    axes = (0, 2, 3)
    m = x.shape[0] * x.shape[2] * x.shape[3]
    mean = x.data.mean(axis=axes)
    var = x.data.var(axis=axes)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma.data[None, :, None, None] * x_hat + beta.data[None, :, None, None]

    def backward(g):
        g_beta = g.sum(axis=axes)
        g_gamma = (g * x_hat).sum(axis=axes)
        g_hat = g * gamma.data[None, :, None, None]
        s1 = g_hat.sum(axis=axes, keepdims=True)
        s2 = (g_hat * x_hat).sum(axis=axes, keepdims=True)
        g_x = inv_std[None, :, None, None] / m * (m * g_hat - s1 - x_hat * s2)
        return g_x, g_gamma, g_beta
    out_t = _emit("batch_norm", (x, gamma, beta), out, backward)
    return out_t, mean, var


def batch_norm_eval(x: Tensor, gamma: Tensor, beta: Tensor,
                    running_mean: np.ndarray, running_var: np.ndarray,
                    eps: float = 1e-5) -> Tensor:
    """Batch normalization using frozen running statistics."""
    if x.ndim != 4:
        raise ShapeError("batch_norm expects an NCHW tensor")
    inv_std = 1.0 / np.sqrt(running_var + eps)
    x_hat = (x.data - running_mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma.data[None, :, None, None] * x_hat + beta.data[None, :, None, None]

    def backward(g):
        g_beta = g.sum(axis=(0, 2, 3))
        g_gamma = (g * x_hat).sum(axis=(0, 2, 3))
        g_x = g * (gamma.data * inv_std)[None, :, None, None]
        return g_x, g_gamma, g_beta
    return _emit("batch_norm", (x, gamma, beta), out, backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis; gamma and beta have that axis's extent."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layer_norm affine shapes {gamma.shape}, {beta.shape} do not match last axis {d}")
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std
    out = gamma.data * x_hat + beta.data

    def backward(g):
        red = tuple(range(x.ndim - 1))
        g_beta = g.sum(axis=red)
        g_gamma = (g * x_hat).sum(axis=red)
        g_hat = g * gamma.data
        s1 = g_hat.sum(axis=-1, keepdims=True)
        s2 = (g_hat * x_hat).sum(axis=-1, keepdims=True)
        g_x = inv_std / d * (d * g_hat - s1 - x_hat * s2)
        return g_x, g_gamma, g_beta
    return _emit("layer_norm", (x, gamma, beta), out, backward)


# ---------------------------------------------------------------------------
# resampling


_RESIZE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Dense [n_out, n_in] interpolation matrix with half-pixel centers."""
    key = (n_in, n_out)
    cached = _RESIZE_CACHE.get(key)
    if cached is not None:
        return cached
    r = np.zeros((n_out, n_in))
    if n_in == 1:
        r[:, 0] = 1.0
    else:
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        i0 = np.minimum(np.floor(src).astype(np.int64), n_in - 2)
        frac = src - i0
        rows = np.arange(n_out)
        r[rows, i0] = 1.0 - frac
        r[rows, i0 + 1] = frac
    _RESIZE_CACHE[key] = r
    return r


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear resampling of an NCHW tensor with half-pixel alignment."""
    if x.ndim != 4:
        raise ShapeError("bilinear_resize expects an NCHW tensor")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"bilinear_resize target {out_h}x{out_w} must be positive")
    rh = _resize_matrix(x.shape[2], out_h)
    rw = _resize_matrix(x.shape[3], out_w)
    out = np.einsum("oh,nchw,pw->ncop", rh, x.data, rw, optimize=True)

    def backward(g):
        return (np.einsum("oh,ncop,pw->nchw", rh, g, rw, optimize=True),)
    return _emit("bilinear_resize", (x,), out, backward)


# ---------------------------------------------------------------------------
# sequence kernels


def ssm_scan(u: Tensor, delta: Tensor, a: Tensor, b: Tensor, c: Tensor,
             d_skip: Tensor) -> Tensor:
    """Selective state-space scan.

    Discretizes per step as dA = exp(delta * A), dBu = delta * B * u, runs
    h_t = dA_t * h_{t-1} + dBu_t from h_0 = 0, and reads out
    y_t = C_t . h_t + D_skip * u_t.  Shapes: u, delta [B, L, D]; A [D, N];
    B, C [B, L, N]; D_skip [D].
    """
    bs, ln, d = u.shape
    n = a.shape[1]
    if delta.shape != (bs, ln, d):
        raise ShapeError(f"delta shape {delta.shape} does not match u {u.shape}")
    if a.shape != (d, n) or b.shape != (bs, ln, n) or c.shape != (bs, ln, n):
        raise ShapeError(
            f"ssm_scan state shapes inconsistent: A {a.shape}, B {b.shape}, C {c.shape}")
    if d_skip.shape != (d,):
        raise ShapeError(f"d_skip shape {d_skip.shape} does not match {d} channels")
    if delta.data.min() <= 0.0:
        raise NumericsError("ssm_scan discretization requires strictly positive delta")
    y, h_all = _kernels.ssm_scan_forward(u.data, delta.data, a.data, b.data,
                                         c.data, d_skip.data)

    def backward(g):
        grads = _kernels.ssm_scan_backward(
            np.ascontiguousarray(g), u.data, delta.data, a.data, b.data,
            c.data, d_skip.data, np.asarray(h_all))
        return tuple(np.asarray(x) for x in grads)
    return _emit("ssm_scan", (u, delta, a, b, c, d_skip), np.asarray(y), backward)


def dwconv1d(u: Tensor, w: Tensor) -> Tensor:
    """Causal depthwise 1-D convolution over [B, L, D] with weight [D, K]."""
    if u.ndim != 3 or w.ndim != 2 or w.shape[0] != u.shape[2]:
        raise ShapeError(f"dwconv1d got shapes {u.shape} and {w.shape}")
    out = _kernels.dwconv1d_forward(u.data, w.data)

    def backward(g):
        g_u, g_w = _kernels.dwconv1d_backward(np.ascontiguousarray(g), u.data, w.data)
        return np.asarray(g_u), np.asarray(g_w)
    return _emit("dwconv1d", (u, w), np.asarray(out), backward)
