import math

import numpy as np
import pytest

from riskflow.autodiff import Tensor
from riskflow.optim import AdamWState, NonFiniteGradientError, adamw_step


class ScalarAdamW:
    """Per-coordinate reference written from the textbook update."""

    def __init__(self, lr, b1=0.9, b2=0.999, eps=1e-8, wd=0.0):
        self.lr, self.b1, self.b2, self.eps, self.wd = lr, b1, b2, eps, wd
        self.m = self.v = None
        self.t = 0

    def step(self, theta, grad):
        if self.m is None:
            self.m = [0.0] * len(theta)
            self.v = [0.0] * len(theta)
        self.t += 1
        out = []
        for i, (p, g) in enumerate(zip(theta, grad)):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            mhat = self.m[i] / (1 - self.b1**self.t)
            vhat = self.v[i] / (1 - self.b2**self.t)
            p = p - self.lr * self.wd * p
            out.append(p - self.lr * mhat / (math.sqrt(vhat) + self.eps))
        return out


def test_zero_gradient_pure_decay():
    p = Tensor([1.0, -2.0, 0.5], requires_grad=True)
    state = AdamWState(lr=0.1, weight_decay=0.2)
    adamw_step(state, {"p": p}, {"p": np.zeros(3)})
    np.testing.assert_allclose(p.data, np.array([1.0, -2.0, 0.5]) * (1 - 0.1 * 0.2), rtol=1e-15)
    assert state.step == 1


def test_first_step_is_signed_lr():
    g = np.array([3.0, -0.01, 1e3])
    p = Tensor(np.zeros(3), requires_grad=True)
    adamw_step(AdamWState(lr=1e-3, weight_decay=0.0), {"p": p}, {"p": g})
    np.testing.assert_allclose(p.data, -1e-3 * np.sign(g), rtol=1e-5)


def test_quadratic_norm_decreases():
    theta = Tensor([1.0, 1.0], requires_grad=True)
    state = AdamWState(lr=1e-2, weight_decay=0.01)
    norms = [np.linalg.norm(theta.data)]
    for _ in range(100):
        adamw_step(state, {"t": theta}, {"t": 2 * theta.data})
        norms.append(np.linalg.norm(theta.data))
    assert all(b < a for a, b in zip(norms, norms[1:]))


@pytest.mark.parametrize("wd", [0.0, 0.05])
def test_matches_scalar_reference_on_quadratic(wd):
    a = np.array([1.0, 4.0, 0.25])
    theta = Tensor([1.0, -1.0, 2.0], requires_grad=True)
    ref_theta = list(theta.data)
    ref = ScalarAdamW(lr=3e-2, wd=wd)
    state = AdamWState(lr=3e-2, weight_decay=wd)
    for _ in range(200):
        g = 2 * a * theta.data
        ref_theta = ref.step(ref_theta, [2 * ai * ti for ai, ti in zip(a, ref_theta)])
        adamw_step(state, {"t": theta}, {"t": g})
    np.testing.assert_allclose(theta.data, ref_theta, rtol=1e-12, atol=1e-14)


def test_moment_shapes_and_nonnegative_second_moment():
    rng = np.random.default_rng(0)
    params = {"W": Tensor(rng.normal(size=(3, 4)), requires_grad=True), "b": Tensor(np.zeros(4), requires_grad=True)}
    state = AdamWState()
    for _ in range(3):
        adamw_step(state, params, {k: rng.normal(size=p.shape) for k, p in params.items()})
    for k, p in params.items():
        assert state.m[k].shape == p.shape and state.v[k].shape == p.shape
        assert np.all(state.v[k] >= 0)


def test_non_finite_gradient_named():
    p = Tensor([1.0], requires_grad=True)
    with pytest.raises(NonFiniteGradientError, match="bias"):
        adamw_step(AdamWState(), {"bias": p}, {"bias": np.array([np.nan])})


def test_tolerant_mode_zeroes_non_finite():
    p = Tensor([1.0, 1.0], requires_grad=True)
    adamw_step(AdamWState(lr=0.1, weight_decay=0.0, tolerant=True), {"p": p}, {"p": np.array([np.inf, 1.0])})
    assert p.data[0] == 1.0 and p.data[1] < 1.0


def test_mismatched_keys():
    with pytest.raises(KeyError):
        adamw_step(AdamWState(), {"a": Tensor([1.0])}, {"b": np.zeros(1)})


def test_bitwise_reproducible_trajectory():
    def run():
        rng = np.random.default_rng(9)
        p = Tensor(rng.normal(size=5), requires_grad=True)
        state = AdamWState()
        for _ in range(50):
            adamw_step(state, {"p": p}, {"p": np.sin(p.data) + rng.normal(size=5)})
        return p.data.copy()

    np.testing.assert_array_equal(run(), run())
