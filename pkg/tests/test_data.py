import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskflow.data import (
    SOURCE_RING,
    TARGET_RING,
    RingMixtureSpec,
    dump_pairs_csv,
    make_batch,
    make_rng,
    rectify,
    sample_ring,
)


def test_zero_noise_hits_lobe_centers():
    spec = RingMixtureSpec(K=6, radius=1.0, sigma_ang=0.0, sigma_rad=0.0)
    pts = sample_ring(spec, 500, make_rng(0, 0))
    centers = np.stack([np.cos(2 * np.pi * np.arange(6) / 6), np.sin(2 * np.pi * np.arange(6) / 6)], axis=1)
    d = np.linalg.norm(pts[:, None, :] - centers[None], axis=2).min(axis=1)
    assert d.max() < 1e-15


def test_default_source_mean_radius():
    pts = sample_ring(SOURCE_RING, 100_000, make_rng(1, 0))
    assert abs(np.linalg.norm(pts, axis=1).mean() - 1 / 3) < 0.005


def test_lobe_occupancy_uniform():
    pts = sample_ring(TARGET_RING, 100_000, make_rng(2, 0))
    lobe = np.round(np.arctan2(pts[:, 1], pts[:, 0]) / (2 * np.pi / 6)).astype(int) % 6
    frac = np.bincount(lobe, minlength=6) / len(lobe)
    assert np.all(np.abs(frac - 1 / 6) < 0.01)


def test_sample_ring_rejects_empty():
    with pytest.raises(ValueError):
        sample_ring(SOURCE_RING, 0, make_rng(0, 0))


@pytest.mark.parametrize("kwargs", [dict(K=0), dict(radius=0.0), dict(sigma_ang=-1.0)])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        RingMixtureSpec(**kwargs)


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.integers(1, 64))
def test_batch_invariants(seed, B):
    batch = make_batch(SOURCE_RING, TARGET_RING, B, make_rng(seed, 0), make_rng(seed, 1))
    assert len(batch) == B
    np.testing.assert_array_equal(batch.u + batch.x0, batch.x0 + (batch.x1 - batch.x0))
    np.testing.assert_allclose(batch.u + batch.x0, batch.x1, rtol=0, atol=1e-15)
    assert np.all((batch.t >= 0) & (batch.t <= 1))
    # xt lies on the chord at fraction t.
    seg = np.linalg.norm(batch.x1 - batch.x0, axis=1)
    np.testing.assert_allclose(np.linalg.norm(batch.xt - batch.x0, axis=1), batch.t * seg, rtol=0, atol=1e-12)


def test_endpoint_rows_equal_sources():
    x0 = np.array([[0.1, 0.2], [0.3, -0.4]])
    x1 = np.array([[1.0, 0.0], [0.0, 1.0]])
    b = rectify(x0, x1, np.array([0.0, 1.0]))
    np.testing.assert_array_equal(b.xt[0], x0[0])
    np.testing.assert_array_equal(b.xt[1], x1[1])


def test_velocity_constant_in_t():
    x0 = np.array([[0.1, 0.2]] * 5)
    x1 = np.array([[1.0, -1.0]] * 5)
    b = rectify(x0, x1, np.linspace(0, 1, 5))
    assert np.all(b.u == b.u[0])


def test_seed_replay():
    a = make_batch(SOURCE_RING, TARGET_RING, 32, make_rng(42, 0))
    b = make_batch(SOURCE_RING, TARGET_RING, 32, make_rng(42, 0))
    for name in ("x0", "x1", "t", "xt", "u"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_streams_are_independent():
    a = make_rng(42, 0).standard_normal(4)
    b = make_rng(42, 1).standard_normal(4)
    assert not np.allclose(a, b)


def test_dump_csv(tmp_path):
    x0 = sample_ring(SOURCE_RING, 5, make_rng(0, 0))
    x1 = sample_ring(TARGET_RING, 5, make_rng(0, 1))
    path = tmp_path / "pairs.csv"
    dump_pairs_csv(path, x0, x1)
    rows = path.read_text().splitlines()
    assert rows[0] == "x0_1,x0_2,x1_1,x1_2"
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, :2], x0)
    np.testing.assert_array_equal(back[:, 2:], x1)
