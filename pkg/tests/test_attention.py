"""Coordinate attention, the selective scan, and the combined block."""

from __future__ import annotations

import numpy as np
import pytest

from fusionsort import ops
from fusionsort.attention import (ComprehensiveAttention, CoordAttention,
                                  MambaBlock)
from fusionsort.errors import ConfigError
from fusionsort.tensor import Tensor


def zero_params(module):
    for p in module.parameters():
        p.value.data[...] = 0.0


def unrolled_scan(u, delta, a, b, c, d):
    """Reference recurrence: h_t = exp(delta*A) h_{t-1} + delta*B u, y = C h + D u."""
    batch, length, dim = u.shape
    state = a.shape[1]
    y = np.zeros_like(u)
    for n in range(batch):
        h = np.zeros((dim, state))
        for t in range(length):
            abar = np.exp(delta[n, t][:, None] * a)
            h = abar * h + delta[n, t][:, None] * b[n, t][None, :] * u[n, t][:, None]
            y[n, t] = h @ c[n, t] + d * u[n, t]
    return y


def test_coord_attention_zero_params_quarters_input(rng):
    ca = CoordAttention("ca", 4, 2, rng)
    ca.set_training(False)
    zero_params(ca)
    x = Tensor(rng.uniform(-1, 1, (2, 4, 3, 5)))
    out = ca(x)
    # all convs emit zero, both sigmoid gates are 0.5, so out = x / 4
    np.testing.assert_allclose(out.data, x.data / 4.0, atol=1e-12)


def test_coord_attention_never_amplifies(rng):
    ca = CoordAttention("ca", 4, 2, rng)
    ca.set_training(False)
    for p in ca.parameters():
        p.value.data[...] = rng.uniform(-1, 1, p.shape)
    x = Tensor(rng.uniform(-2, 2, (1, 4, 4, 6)))
    out = ca(x)
    assert np.all(np.abs(out.data) <= np.abs(x.data) + 1e-12)


def test_coord_attention_matches_reference(rng):
    # independent numpy replay of the pooling/conv/gate pipeline
    ca = CoordAttention("ca", 2, 2, rng)
    ca.set_training(False)
    for p in ca.parameters():
        p.value.data[...] = rng.uniform(-0.8, 0.8, p.shape)
    x = rng.uniform(-1, 1, (1, 2, 2, 2))
    out = ca(Tensor(x)).data

    w_sh = ca.shared.weight.value.data
    b_sh = ca.shared.bias.value.data
    gamma = ca.bn.gamma.value.data
    beta = ca.bn.beta.value.data
    rm = ca.bn.running_mean.value.data
    rv = ca.bn.running_var.value.data
    w_x = ca.conv_x.weight.value.data
    b_x = ca.conv_x.bias.value.data
    w_y = ca.conv_y.weight.value.data
    b_y = ca.conv_y.bias.value.data

    def conv1x1(v, w, b):
        return np.einsum("oi,nihw->nohw", w[:, :, 0, 0], v) + b[None, :, None, None]

    def silu(v):
        return v / (1.0 + np.exp(-v))

    pooled_x = x.mean(axis=3, keepdims=True)
    pooled_y = x.mean(axis=2, keepdims=True).transpose(0, 1, 3, 2)
    joint = np.concatenate([pooled_x, pooled_y], axis=2)
    mixed = conv1x1(joint, w_sh, b_sh)
    mixed = (mixed - rm[None, :, None, None]) / np.sqrt(rv[None, :, None, None] + 1e-5)
    mixed = silu(mixed * gamma[None, :, None, None] + beta[None, :, None, None])
    part_x, part_y = mixed[:, :, :2], mixed[:, :, 2:].transpose(0, 1, 3, 2)
    gate_x = 1.0 / (1.0 + np.exp(-conv1x1(part_x, w_x, b_x)))
    gate_y = 1.0 / (1.0 + np.exp(-conv1x1(part_y, w_y, b_y)))
    expect = x * gate_x * gate_y
    np.testing.assert_allclose(out, expect, atol=1e-12)


def test_ssm_scalar_hand_example():
    # D_inner=1, N=1, L=2: delta=1, A=-ln 2 gives Abar=1/2
    u = np.ones((1, 2, 1))
    delta = np.ones((1, 2, 1))
    a = np.array([[-np.log(2.0)]])
    b = np.ones((1, 2, 1))
    c = np.ones((1, 2, 1))
    d = np.ones(1)
    y = ops.ssm_scan(Tensor(u), Tensor(delta), Tensor(a), Tensor(b),
                     Tensor(c), Tensor(d))
    # h1 = 1, y1 = 1 + 1; h2 = 0.5 + 1, y2 = 1.5 + 1
    np.testing.assert_allclose(y.data.ravel(), [2.0, 2.5], atol=1e-12)


def test_ssm_matches_unrolled_recurrence(rng):
    for _ in range(20):
        batch = int(rng.integers(1, 3))
        length = int(rng.integers(1, 17))
        dim = int(rng.integers(1, 5))
        state = int(rng.integers(1, 5))
        u = rng.uniform(-2, 2, (batch, length, dim))
        delta = rng.uniform(0.05, 2.0, (batch, length, dim))
        a = -rng.uniform(0.1, 3.0, (dim, state))
        b = rng.uniform(-2, 2, (batch, length, state))
        c = rng.uniform(-2, 2, (batch, length, state))
        d = rng.uniform(-1, 1, dim)
        y = ops.ssm_scan(Tensor(u), Tensor(delta), Tensor(a), Tensor(b),
                         Tensor(c), Tensor(d))
        np.testing.assert_allclose(y.data, unrolled_scan(u, delta, a, b, c, d),
                                   atol=1e-10)


def test_ssm_fast_decay_is_memoryless(rng):
    # A very negative: the state forgets instantly, y_t depends on step t only
    u = rng.uniform(-1, 1, (1, 6, 2))
    delta = rng.uniform(0.5, 1.0, (1, 6, 2))
    a = np.full((2, 3), -1e9)
    b = rng.uniform(-1, 1, (1, 6, 3))
    c = rng.uniform(-1, 1, (1, 6, 3))
    d = rng.uniform(-1, 1, 2)
    y = ops.ssm_scan(Tensor(u), Tensor(delta), Tensor(a), Tensor(b),
                     Tensor(c), Tensor(d)).data
    # h_t = delta*B*u with no carry-over, so y_t = delta*u*(B . C) + D*u
    bc = (b * c).sum(axis=2)
    expect = delta * u * bc[:, :, None] + d * u
    np.testing.assert_allclose(y, expect, atol=1e-10)


def test_mamba_zero_projections_is_identity(rng):
    block = MambaBlock("m", 3, 2, 3, rng)
    zero_params(block)
    x = Tensor(rng.uniform(-1, 1, (1, 3, 3, 4)))
    out = block(x)
    np.testing.assert_allclose(out.data, x.data, atol=1e-12)


def test_mamba_is_causal_in_raster_order(rng):
    block = MambaBlock("m", 2, 2, 3, rng)
    for p in block.parameters():
        p.value.data[...] = rng.uniform(-0.5, 0.5, p.shape)
    h, w = 3, 4
    x = rng.uniform(-1, 1, (1, 2, h, w))
    base = block(Tensor(x)).data.copy()
    # bump raster position 7 = (row 1, col 3); earlier positions must not move
    bumped = x.copy()
    bumped[0, :, 1, 3] += 5.0
    out = block(Tensor(bumped)).data
    flat_base = base.transpose(0, 2, 3, 1).reshape(-1, 2)
    flat_out = out.transpose(0, 2, 3, 1).reshape(-1, 2)
    np.testing.assert_array_equal(flat_out[:7], flat_base[:7])
    assert not np.allclose(flat_out[7:], flat_base[7:])


def test_comprehensive_both_paths_off_is_norm_activation(rng):
    block = ComprehensiveAttention("attn", 3, False, False, False, 1, 2, 3, rng)
    block.set_training(False)
    x = Tensor(rng.uniform(-1, 1, (1, 3, 4, 4)))
    out = block(x)
    # identity path, then eval batch norm (gamma 1, beta 0, stats 0/1) + silu
    normed = x.data / np.sqrt(1.0 + 1e-5)
    expect = normed / (1.0 + np.exp(-normed))
    np.testing.assert_allclose(out.data, expect, atol=1e-12)


def test_weighted_fusion_without_paths_rejected(rng):
    with pytest.raises(ConfigError):
        ComprehensiveAttention("attn", 3, False, False, True, 1, 2, 3, rng)


def test_single_path_weight_is_exactly_one(rng):
    # softmax over the single live entry must give weight 1, so the wf and
    # plain single-path configurations agree
    for flags in [(True, False), (False, True)]:
        conv_on, mamba_on = flags
        wf = ComprehensiveAttention("a", 4, conv_on, mamba_on, True, 2, 2, 3,
                                    np.random.default_rng(5))
        plain = ComprehensiveAttention("a", 4, conv_on, mamba_on, False, 2, 2, 3,
                                       np.random.default_rng(5))
        wf.set_training(False)
        plain.set_training(False)
        wf.fusion_raw.value.data[...] = np.array([1.7, -0.3])
        x = Tensor(np.random.default_rng(6).uniform(-1, 1, (1, 4, 4, 4)))
        np.testing.assert_allclose(wf(x).data, plain(x).data, atol=1e-12)


def test_two_path_fusion_weights_sum_to_one(rng):
    block = ComprehensiveAttention("attn", 4, True, True, True, 2, 2, 3, rng)
    block.set_training(False)
    block.fusion_raw.value.data[...] = np.array([0.3, -1.2])
    x = Tensor(rng.uniform(-1, 1, (1, 4, 4, 4)))
    with_softmax = block(x).data

    # replaying with explicit convex weights reproduces the block output
    w = np.exp([0.3, -1.2])
    w = w / w.sum()
    conv_term = block.reduce_conv(block.coord(x))
    mamba_term = block.reduce_mamba(block.mamba(x))
    merged = Tensor(w[0] * conv_term.data + w[1] * mamba_term.data)
    expect = ops.silu(block.bn(merged)).data
    np.testing.assert_allclose(with_softmax, expect, atol=1e-12)


def test_coord_attention_reduction_must_divide(rng):
    with pytest.raises(ConfigError):
        CoordAttention("ca", 5, 2, rng)
