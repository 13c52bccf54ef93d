import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riskflow import autodiff as ad
from riskflow.model import SinusoidalEmbedding, VelocityField, embed_time, forward, init_velocity_field


def test_embedding_at_zero():
    e = embed_time(0.0, SinusoidalEmbedding(8))
    np.testing.assert_array_equal(e[0::2], 0.0)
    np.testing.assert_array_equal(e[1::2], 1.0)


@given(st.floats(-10, 10))
def test_embedding_pairs_on_unit_circle(t):
    e = embed_time(t, SinusoidalEmbedding(8))
    np.testing.assert_allclose(e[0::2] ** 2 + e[1::2] ** 2, 1.0, atol=1e-12)


def test_embedding_unit_frequency():
    emb = SinusoidalEmbedding(2, (1.0, 2.0))
    e = embed_time(math.pi / 2, emb)
    assert e[0] == pytest.approx(1.0)
    assert e[1] == pytest.approx(0.0, abs=1e-15)


def test_default_frequencies_are_doubling_multiples_of_pi():
    emb = SinusoidalEmbedding(8)
    assert emb.dim == 16
    np.testing.assert_allclose(emb.frequencies, [2**k * math.pi for k in range(8)])


def test_embedding_rejects_unsorted_frequencies():
    with pytest.raises(ValueError):
        SinusoidalEmbedding(2, (2.0, 1.0))


def test_zero_last_layer_gives_zero_output():
    field = init_velocity_field(np.random.default_rng(0))
    rng = np.random.default_rng(1)
    out = forward(field, rng.normal(size=(7, 2)), rng.uniform(size=7))
    assert out.shape == (7, 2)
    np.testing.assert_array_equal(out.data, 0.0)


def _nonzero_field(seed=0):
    return init_velocity_field(np.random.default_rng(seed), hidden=(16, 16), zero_last=False)


def test_forward_deterministic_across_inits():
    rng = np.random.default_rng(2)
    x, t = rng.normal(size=(5, 2)), rng.uniform(size=5)
    a = forward(_nonzero_field(), x, t).data
    b = forward(_nonzero_field(), x, t).data
    np.testing.assert_array_equal(a, b)


def test_single_row_matches_batch_row():
    field = _nonzero_field()
    rng = np.random.default_rng(3)
    x, t = rng.normal(size=(9, 2)), rng.uniform(size=9)
    full = forward(field, x, t).data
    for i in range(9):
        np.testing.assert_allclose(forward(field, x[i : i + 1], t[i : i + 1]).data[0], full[i], rtol=0, atol=1e-14)


def test_shape_mismatch():
    field = _nonzero_field()
    with pytest.raises(ad.ShapeError):
        forward(field, np.zeros((3, 2)), np.zeros(4))


def test_scalar_loop_oracle():
    # Explicit per-row python loops, independent of the tensor path.
    field = _nonzero_field(5)
    rng = np.random.default_rng(6)
    x, t = rng.normal(size=(3, 2)), rng.uniform(size=3)
    out = forward(field, x, t).data
    p = {k: v.data for k, v in field.params.items()}
    for b in range(3):
        h = [x[b, 0], x[b, 1]]
        for w in field.embedding.frequencies:
            h += [math.sin(w * t[b]), math.cos(w * t[b])]
        for layer in range(field.num_layers):
            W, bias = p[f"W{layer}"], p[f"b{layer}"]
            h = [sum(h[i] * W[i, j] for i in range(len(h))) + bias[j] for j in range(W.shape[1])]
            if layer < field.num_layers - 1:
                h = [math.tanh(v) for v in h]
        np.testing.assert_allclose(out[b], h, rtol=1e-12, atol=1e-13)


def test_gradient_of_mean_square_output_matches_finite_differences():
    field = init_velocity_field(np.random.default_rng(7), hidden=(6, 5), embedding=SinusoidalEmbedding(2), zero_last=False)
    rng = np.random.default_rng(8)
    x, t = rng.normal(size=(4, 2)), rng.uniform(size=4)

    def loss():
        return ad.mean(ad.square_norm_rows(forward(field, x, t)))

    with ad.Tape() as tape:
        grads = tape.backward(loss())
    h = 1e-5
    for name, p in field.params.items():
        for idx in np.ndindex(p.shape):
            orig = p.data[idx]
            p.data[idx] = orig + h
            up = loss().item()
            p.data[idx] = orig - h
            down = loss().item()
            p.data[idx] = orig
            numeric = (up - down) / (2 * h)
            assert grads[p][idx] == pytest.approx(numeric, rel=1e-4, abs=1e-9), name


def test_callable_broadcasts_scalar_time():
    field = _nonzero_field()
    x = np.random.default_rng(0).normal(size=(4, 2))
    np.testing.assert_array_equal(field(x, 0.3), forward(field, x, np.full(4, 0.3)).data)


def test_checkpoint_roundtrip(tmp_path):
    field = _nonzero_field(11)
    path = tmp_path / "ckpt.npz"
    field.save(path)
    loaded = VelocityField.load(path)
    assert loaded.widths == field.widths
    assert loaded.embedding == field.embedding
    x = np.random.default_rng(0).normal(size=(3, 2))
    np.testing.assert_array_equal(loaded(x, 0.5), field(x, 0.5))
