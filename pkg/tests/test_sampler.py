import math

import numpy as np
import pytest

from riskflow.model import init_velocity_field
from riskflow.sampler import IntegrationError, IntegratorConfig, integrate


def linear_field(x, t):
    return x


def error_at(method, n):
    x0 = np.array([[1.0, -0.5]])
    out = integrate(linear_field, x0, IntegratorConfig(method, n))
    return np.abs(out - x0 * math.e).max()


@pytest.mark.parametrize("method", ["euler", "rk4"])
@pytest.mark.parametrize("n", [1, 7, 100])
def test_constant_field_exact(method, n):
    c = np.array([0.25, -1.5])
    x0 = np.random.default_rng(0).normal(size=(4, 2))
    out = integrate(lambda x, t: np.broadcast_to(c, x.shape), x0, IntegratorConfig(method, n))
    np.testing.assert_allclose(out, x0 + c, rtol=0, atol=1e-14)


def test_single_euler_step():
    field = init_velocity_field(np.random.default_rng(0), hidden=(8,), zero_last=False)
    x0 = np.random.default_rng(1).normal(size=(5, 2))
    np.testing.assert_array_equal(integrate(field, x0, IntegratorConfig("euler", 1)), x0 + field(x0, 0.0))


def test_rk4_linear_field():
    x0 = np.array([[1.0, 2.0], [-0.3, 0.7]])
    out = integrate(linear_field, x0, IntegratorConfig("rk4", 100))
    np.testing.assert_allclose(out, x0 * math.e, rtol=1e-6)


@pytest.mark.parametrize("method, order, tol", [("euler", 1, 0.3), ("rk4", 4, 0.3)])
def test_convergence_order(method, order, tol):
    steps = np.array([4, 8, 16, 32, 64])
    errs = [error_at(method, n) for n in steps]
    slope, _ = np.polyfit(np.log(1.0 / steps), np.log(errs), 1)
    assert abs(slope - order) <= tol


def test_rows_independent_bitwise():
    def swirl(x, t):
        return np.stack([np.sin(3 * x[:, 1] + t), np.cos(x[:, 0]) * np.tanh(x[:, 1])], axis=1)

    x0 = np.random.default_rng(3).normal(size=(6, 2))
    cfg = IntegratorConfig("rk4", 20)
    full = integrate(swirl, x0, cfg)
    for i in range(6):
        np.testing.assert_array_equal(integrate(swirl, x0[i : i + 1], cfg)[0], full[i])


def test_rows_independent_for_mlp_field():
    # BLAS picks different kernels for 1-row and n-row products, so allow a few ulps.
    field = init_velocity_field(np.random.default_rng(2), hidden=(16,), zero_last=False)
    x0 = np.random.default_rng(3).normal(size=(6, 2))
    cfg = IntegratorConfig("rk4", 20)
    full = integrate(field, x0, cfg)
    for i in range(6):
        np.testing.assert_allclose(integrate(field, x0[i : i + 1], cfg)[0], full[i], rtol=1e-13, atol=1e-13)


def test_non_finite_reports_step():
    def blowup(x, t):
        return np.full_like(x, np.inf) if t >= 0.5 else np.zeros_like(x)

    with pytest.raises(IntegrationError) as info:
        integrate(blowup, np.zeros((2, 2)), IntegratorConfig("euler", 10))
    assert info.value.step == 5


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig("heun", 10)
    with pytest.raises(ValueError):
        IntegratorConfig("rk4", 0)
