"""The finite-difference checker itself: exactness, tolerances, diagnostics."""

from __future__ import annotations

import numpy as np
import pytest

import fusionsort.tensor as tensor_mod
from fusionsort import ops
from fusionsort.errors import ConfigError, NumericsError
from fusionsort.gradcheck import grad_check
from fusionsort.tensor import Parameter, Tensor


def test_quadratic_is_exact(rng):
    # d(theta^2)/dtheta is linear, so central differences are exact up to
    # round-off regardless of eps
    theta = Parameter("theta", rng.uniform(-2, 2, (4,)))
    err = grad_check(lambda: ops.mean_all(ops.mul(theta.value, theta.value)),
                     [theta])
    assert err < 1e-9


def test_sigmoid_chain(rng):
    theta = Parameter("theta", rng.uniform(-1.5, 1.5, (3, 3)))
    w = Tensor(rng.uniform(-1, 1, (3, 3)))
    err = grad_check(lambda: ops.mean_all(ops.mul(ops.sigmoid(theta.value), w)),
                     [theta])
    assert err < 1e-8


def test_values_restored_after_check(rng):
    theta = Parameter("theta", rng.uniform(-2, 2, (5,)))
    before = theta.value.data.copy()
    grad_check(lambda: ops.mean_all(ops.mul(theta.value, theta.value)), [theta])
    np.testing.assert_array_equal(theta.value.data, before)


def test_eps_must_be_positive(rng):
    theta = Parameter("theta", rng.uniform(-1, 1, (2,)))
    with pytest.raises(ConfigError):
        grad_check(lambda: ops.mean_all(theta.value), [theta], eps=0.0)


def test_invalid_loss_under_perturbation_names_parameter():
    # finite at the base point, invalid once eps pushes delta below zero
    theta = Parameter("offender", np.array([5e-6]))
    u = Tensor(np.ones((1, 1, 1)))
    a = Tensor(-np.ones((1, 1)))
    b = Tensor(np.ones((1, 1, 1)))
    c = Tensor(np.ones((1, 1, 1)))
    d = Tensor(np.ones(1))

    def build():
        delta = ops.reshape(theta.value, (1, 1, 1))
        return ops.mean_all(ops.ssm_scan(u, delta, a, b, c, d))

    with pytest.raises(NumericsError, match="offender"):
        grad_check(build, [theta], eps=1e-5)


def test_detects_wrong_backward(rng):
    # a deliberately perturbed backward rule must blow past the tolerance
    theta = Parameter("theta", rng.uniform(0.5, 1.5, (4,)))
    w = Tensor(rng.uniform(0.5, 1.5, (4,)))
    tensor_mod.SABOTAGED_OPS.add("mul")
    try:
        err = grad_check(lambda: ops.mean_all(ops.mul(theta.value, w)), [theta])
    finally:
        tensor_mod.SABOTAGED_OPS.discard("mul")
    assert err > 1e-4
    clean = grad_check(lambda: ops.mean_all(ops.mul(theta.value, w)), [theta])
    assert clean < 1e-9
