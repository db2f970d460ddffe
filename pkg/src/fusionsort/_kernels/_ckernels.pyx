# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the numpy kernels in py_kernels.

Direct nested loops over typed memoryviews.  Contracts and argument order
match py_kernels exactly; the backend selector treats the two as
interchangeable.
"""

from libc.math cimport exp

import numpy as np


BACKEND = "cython"


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                   int stride, int padding, int groups):
    cdef Py_ssize_t n = x.shape[0], c_in = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t c_out = w.shape[0], c_g = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t out_h = (h + 2 * padding - kh) // stride + 1
    cdef Py_ssize_t out_w = (wd + 2 * padding - kw) // stride + 1
    cdef Py_ssize_t og = c_out // groups
    out_arr = np.zeros((n, c_out, out_h, out_w), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, g, oc, ic, oh, ow, i, j, ih, iw
    cdef double acc
    for b in range(n):
        for g in range(groups):
            for oc in range(g * og, (g + 1) * og):
                for oh in range(out_h):
                    for ow in range(out_w):
                        acc = 0.0
                        for ic in range(c_g):
                            for i in range(kh):
                                ih = oh * stride + i - padding
                                if ih < 0 or ih >= h:
                                    continue
                                for j in range(kw):
                                    iw = ow * stride + j - padding
                                    if iw < 0 or iw >= wd:
                                        continue
                                    acc += x[b, g * c_g + ic, ih, iw] * w[oc, ic, i, j]
                        out[b, oc, oh, ow] = acc
    return out_arr


def conv2d_backward_input(double[:, :, :, ::1] g_out, double[:, :, :, ::1] w,
                          int h, int wd, int stride, int padding, int groups):
    cdef Py_ssize_t n = g_out.shape[0], c_out = g_out.shape[1]
    cdef Py_ssize_t out_h = g_out.shape[2], out_w = g_out.shape[3]
    cdef Py_ssize_t c_g = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t og = c_out // groups
    g_x_arr = np.zeros((n, c_g * groups, h, wd), dtype=np.float64)
    cdef double[:, :, :, ::1] g_x = g_x_arr
    cdef Py_ssize_t b, g, oc, ic, oh, ow, i, j, ih, iw
    cdef double go
    for b in range(n):
        for g in range(groups):
            for oc in range(g * og, (g + 1) * og):
                for oh in range(out_h):
                    for ow in range(out_w):
                        go = g_out[b, oc, oh, ow]
                        for ic in range(c_g):
                            for i in range(kh):
                                ih = oh * stride + i - padding
                                if ih < 0 or ih >= h:
                                    continue
                                for j in range(kw):
                                    iw = ow * stride + j - padding
                                    if iw < 0 or iw >= wd:
                                        continue
                                    g_x[b, g * c_g + ic, ih, iw] += go * w[oc, ic, i, j]
    return g_x_arr


def conv2d_backward_weight(double[:, :, :, ::1] g_out, double[:, :, :, ::1] x,
                           int kh, int kw, int stride, int padding, int groups):
    cdef Py_ssize_t n = x.shape[0], c_in = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t c_out = g_out.shape[1]
    cdef Py_ssize_t out_h = g_out.shape[2], out_w = g_out.shape[3]
    cdef Py_ssize_t c_g = c_in // groups
    cdef Py_ssize_t og = c_out // groups
    g_w_arr = np.zeros((c_out, c_g, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] g_w = g_w_arr
    cdef Py_ssize_t b, g, oc, ic, oh, ow, i, j, ih, iw
    cdef double go
    for b in range(n):
        for g in range(groups):
            for oc in range(g * og, (g + 1) * og):
                for oh in range(out_h):
                    for ow in range(out_w):
                        go = g_out[b, oc, oh, ow]
                        for ic in range(c_g):
                            for i in range(kh):
                                ih = oh * stride + i - padding
                                if ih < 0 or ih >= h:
                                    continue
                                for j in range(kw):
                                    iw = ow * stride + j - padding
                                    if iw < 0 or iw >= wd:
                                        continue
                                    g_w[oc, ic, i, j] += go * x[b, g * c_g + ic, ih, iw]
    return g_w_arr


def ssm_scan_forward(double[:, :, ::1] u, double[:, :, ::1] delta,
                     double[:, ::1] a, double[:, :, ::1] b,
                     double[:, :, ::1] c, double[::1] d_skip):
    cdef Py_ssize_t bs = u.shape[0], ln = u.shape[1], d = u.shape[2]
    cdef Py_ssize_t n = a.shape[1]
    y_arr = np.empty((bs, ln, d), dtype=np.float64)
    h_arr = np.empty((bs, ln, d, n), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr
    cdef double[:, :, :, ::1] h_all = h_arr
    cdef Py_ssize_t bi, t, di, ni
    cdef double hv, da, acc, dt, uv
    for bi in range(bs):
        for di in range(d):
            for ni in range(n):
                hv = 0.0
                for t in range(ln):
                    dt = delta[bi, t, di]
                    da = exp(dt * a[di, ni])
                    hv = da * hv + dt * b[bi, t, ni] * u[bi, t, di]
                    h_all[bi, t, di, ni] = hv
        for t in range(ln):
            for di in range(d):
                acc = d_skip[di] * u[bi, t, di]
                for ni in range(n):
                    acc += c[bi, t, ni] * h_all[bi, t, di, ni]
                y[bi, t, di] = acc
    return y_arr, h_arr


def ssm_scan_backward(double[:, :, ::1] g_y, double[:, :, ::1] u,
                      double[:, :, ::1] delta, double[:, ::1] a,
                      double[:, :, ::1] b, double[:, :, ::1] c,
                      double[::1] d_skip, double[:, :, :, ::1] h_all):
    cdef Py_ssize_t bs = u.shape[0], ln = u.shape[1], d = u.shape[2]
    cdef Py_ssize_t n = a.shape[1]
    g_u_arr = np.zeros((bs, ln, d), dtype=np.float64)
    g_delta_arr = np.zeros((bs, ln, d), dtype=np.float64)
    g_a_arr = np.zeros((d, n), dtype=np.float64)
    g_b_arr = np.zeros((bs, ln, n), dtype=np.float64)
    g_c_arr = np.zeros((bs, ln, n), dtype=np.float64)
    g_d_arr = np.zeros((d,), dtype=np.float64)
    cdef double[:, :, ::1] g_u = g_u_arr
    cdef double[:, :, ::1] g_delta = g_delta_arr
    cdef double[:, ::1] g_a = g_a_arr
    cdef double[:, :, ::1] g_b = g_b_arr
    cdef double[:, :, ::1] g_c = g_c_arr
    cdef double[::1] g_d = g_d_arr
    cdef Py_ssize_t bi, t, di, ni
    cdef double gy, gh, da, h_prev, g_da, dt, uv, bv
    for bi in range(bs):
        for t in range(ln):
            for di in range(d):
                gy = g_y[bi, t, di]
                g_u[bi, t, di] += gy * d_skip[di]
                g_d[di] += gy * u[bi, t, di]
                for ni in range(n):
                    g_c[bi, t, ni] += gy * h_all[bi, t, di, ni]
        for di in range(d):
            for ni in range(n):
                gh = 0.0
                for t in range(ln - 1, -1, -1):
                    gh += g_y[bi, t, di] * c[bi, t, ni]
                    dt = delta[bi, t, di]
                    uv = u[bi, t, di]
                    bv = b[bi, t, ni]
                    da = exp(dt * a[di, ni])
                    h_prev = h_all[bi, t - 1, di, ni] if t > 0 else 0.0
                    g_da = gh * h_prev
                    g_delta[bi, t, di] += g_da * da * a[di, ni] + gh * bv * uv
                    g_a[di, ni] += g_da * da * dt
                    g_u[bi, t, di] += gh * bv * dt
                    g_b[bi, t, ni] += gh * dt * uv
                    gh = gh * da
    return g_u_arr, g_delta_arr, g_a_arr, g_b_arr, g_c_arr, g_d_arr


def dwconv1d_forward(double[:, :, ::1] u, double[:, ::1] w):
    cdef Py_ssize_t bs = u.shape[0], ln = u.shape[1], d = u.shape[2]
    cdef Py_ssize_t k = w.shape[1]
    y_arr = np.zeros((bs, ln, d), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t bi, t, di, kk, src
    cdef double acc
    for bi in range(bs):
        for t in range(ln):
            for di in range(d):
                acc = 0.0
                for kk in range(k):
                    src = t - (k - 1) + kk
                    if src >= 0:
                        acc += w[di, kk] * u[bi, src, di]
                y[bi, t, di] = acc
    return y_arr


def dwconv1d_backward(double[:, :, ::1] g_y, double[:, :, ::1] u,
                      double[:, ::1] w):
    cdef Py_ssize_t bs = u.shape[0], ln = u.shape[1], d = u.shape[2]
    cdef Py_ssize_t k = w.shape[1]
    g_u_arr = np.zeros((bs, ln, d), dtype=np.float64)
    g_w_arr = np.zeros((d, k), dtype=np.float64)
    cdef double[:, :, ::1] g_u = g_u_arr
    cdef double[:, ::1] g_w = g_w_arr
    cdef Py_ssize_t bi, t, di, kk, src
    cdef double gy
    for bi in range(bs):
        for t in range(ln):
            for di in range(d):
                gy = g_y[bi, t, di]
                for kk in range(k):
                    src = t - (k - 1) + kk
                    if src >= 0:
                        g_u[bi, src, di] += gy * w[di, kk]
                        g_w[di, kk] += gy * u[bi, src, di]
    return g_u_arr, g_w_arr
