"""Pure-numpy implementations of the hot kernels.

Same contracts as the compiled versions in ``_ckernels``: the backend
selector in ``_kernels/__init__`` picks whichever is available, so every
function here must agree with its compiled twin to float64 round-off.

Convolutions go through im2col built with ``as_strided`` (zero-copy window
views) plus ``tensordot``; the selective-scan kernels loop over the sequence
axis only, with all batch/channel/state work vectorized.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _window_view(xp: np.ndarray, kh: int, kw: int, stride: int,
                 out_h: int, out_w: int) -> np.ndarray:
    """Read-only [N, C, out_h, out_w, kh, kw] window view of a padded image."""
    sn, sc, sh, sw = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp,
        shape=(xp.shape[0], xp.shape[1], out_h, out_w, kh, kw),
        strides=(sn, sc, sh * stride, sw * stride, sh, sw),
        writeable=False)


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int, padding: int,
                   groups: int) -> np.ndarray:
    n, c_in, h, wd = x.shape
    c_out, c_g, kh, kw = w.shape
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (wd + 2 * padding - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    view = _window_view(xp, kh, kw, stride, out_h, out_w)
    og = c_out // groups
    out = np.empty((n, c_out, out_h, out_w), dtype=np.float64)
    for g in range(groups):
        xv = view[:, g * c_g:(g + 1) * c_g]
        wg = w[g * og:(g + 1) * og]
        res = np.tensordot(xv, wg, axes=([1, 4, 5], [1, 2, 3]))
        out[:, g * og:(g + 1) * og] = res.transpose(0, 3, 1, 2)
    return out


def conv2d_backward_input(g_out: np.ndarray, w: np.ndarray, h: int, wd: int,
                          stride: int, padding: int, groups: int) -> np.ndarray:
    n = g_out.shape[0]
    c_out, c_g, kh, kw = w.shape
    out_h, out_w = g_out.shape[2], g_out.shape[3]
    og = c_out // groups
    g_xp = np.zeros((n, c_g * groups, h + 2 * padding, wd + 2 * padding))
    for g in range(groups):
        gg = g_out[:, g * og:(g + 1) * og]
        wg = w[g * og:(g + 1) * og]
        # [N, out_h, out_w, c_g, kh, kw]
        t = np.tensordot(gg, wg, axes=([1], [0]))
        for i in range(kh):
            for j in range(kw):
                g_xp[:, g * c_g:(g + 1) * c_g,
                     i:i + (out_h - 1) * stride + 1:stride,
                     j:j + (out_w - 1) * stride + 1:stride] += \
                    t[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(
        g_xp[:, :, padding:padding + h, padding:padding + wd])


def conv2d_backward_weight(g_out: np.ndarray, x: np.ndarray, kh: int, kw: int,
                           stride: int, padding: int, groups: int) -> np.ndarray:
    c_in = x.shape[1]
    c_out = g_out.shape[1]
    out_h, out_w = g_out.shape[2], g_out.shape[3]
    c_g = c_in // groups
    og = c_out // groups
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    view = _window_view(xp, kh, kw, stride, out_h, out_w)
    g_w = np.empty((c_out, c_g, kh, kw), dtype=np.float64)
    for g in range(groups):
        xv = view[:, g * c_g:(g + 1) * c_g]
        gg = g_out[:, g * og:(g + 1) * og]
        g_w[g * og:(g + 1) * og] = np.tensordot(
            gg, xv, axes=([0, 2, 3], [0, 2, 3]))
    return g_w


def ssm_scan_forward(u: np.ndarray, delta: np.ndarray, a: np.ndarray,
                     b: np.ndarray, c: np.ndarray,
                     d_skip: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bs, ln, d = u.shape
    n = a.shape[1]
    y = np.empty((bs, ln, d), dtype=np.float64)
    h_all = np.empty((bs, ln, d, n), dtype=np.float64)
    h = np.zeros((bs, d, n), dtype=np.float64)
    for t in range(ln):
        da = np.exp(delta[:, t, :, None] * a[None, :, :])
        dbu = delta[:, t, :, None] * b[:, t, None, :] * u[:, t, :, None]
        h = da * h + dbu
        h_all[:, t] = h
        y[:, t] = np.einsum("bn,bdn->bd", c[:, t], h) + d_skip[None, :] * u[:, t]
    return y, h_all


def ssm_scan_backward(g_y: np.ndarray, u: np.ndarray, delta: np.ndarray,
                      a: np.ndarray, b: np.ndarray, c: np.ndarray,
                      d_skip: np.ndarray, h_all: np.ndarray):
    bs, ln, d = u.shape
    n = a.shape[1]
    g_u = g_y * d_skip[None, None, :]
    g_delta = np.zeros_like(delta)
    g_a = np.zeros_like(a)
    g_b = np.zeros_like(b)
    g_c = np.einsum("bld,bldn->bln", g_y, h_all)
    g_d = np.einsum("bld,bld->d", g_y, u)
    # Reverse-time state gradient: gh_t picks up the output term at t plus
    # the recurrence term propagated back through step t + 1.
    gh = np.zeros((bs, d, n), dtype=np.float64)
    for t in range(ln - 1, -1, -1):
        gh = gh + g_y[:, t, :, None] * c[:, t, None, :]
        h_prev = h_all[:, t - 1] if t > 0 else np.zeros((bs, d, n))
        da = np.exp(delta[:, t, :, None] * a[None, :, :])
        g_da = gh * h_prev
        g_delta[:, t] = (np.einsum("bdn,dn->bd", g_da * da, a)
                         + np.einsum("bdn,bn->bd", gh, b[:, t]) * u[:, t])
        g_a += np.einsum("bdn,bd->dn", g_da * da, delta[:, t])
        g_u[:, t] += np.einsum("bdn,bn->bd", gh, b[:, t]) * delta[:, t]
        g_b[:, t] = np.einsum("bdn,bd->bn", gh, delta[:, t] * u[:, t])
        gh = gh * da
    return g_u, g_delta, g_a, g_b, g_c, g_d


def dwconv1d_forward(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Causal depthwise 1-D convolution: y_t mixes u_{t-K+1} .. u_t."""
    bs, ln, d = u.shape
    k = w.shape[1]
    up = np.pad(u, ((0, 0), (k - 1, 0), (0, 0)))
    sb, sl, sd = up.strides
    view = np.lib.stride_tricks.as_strided(
        up, shape=(bs, ln, k, d), strides=(sb, sl, sl, sd), writeable=False)
    return np.einsum("blkd,dk->bld", view, w)


def dwconv1d_backward(g_y: np.ndarray, u: np.ndarray,
                      w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bs, ln, d = u.shape
    k = w.shape[1]
    up = np.pad(u, ((0, 0), (k - 1, 0), (0, 0)))
    sb, sl, sd = up.strides
    view = np.lib.stride_tricks.as_strided(
        up, shape=(bs, ln, k, d), strides=(sb, sl, sl, sd), writeable=False)
    g_w = np.einsum("bld,blkd->dk", g_y, view)
    g_up = np.zeros_like(up)
    for kk in range(k):
        g_up[:, kk:kk + ln, :] += g_y * w[None, None, :, kk]
    return np.ascontiguousarray(g_up[:, k - 1:, :]), g_w
