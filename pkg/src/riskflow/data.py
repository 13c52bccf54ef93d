"""Two-ring Gaussian mixture samplers and rectified training pairs."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Independent RNG stream ids derived from one run seed.
STREAM_DATA = 0
STREAM_TIME = 1
STREAM_INIT = 2
STREAM_EVAL = 3


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator keyed by ``(seed, stream)`` via ``SeedSequence``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class RingMixtureSpec:
    K: int = 6
    radius: float = 1.0
    sigma_ang: float = 0.12
    sigma_rad: float = 0.02

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.sigma_ang < 0 or self.sigma_rad < 0:
            raise ValueError("noise levels must be nonnegative")


SOURCE_RING = RingMixtureSpec(K=6, radius=1.0 / 3.0)
TARGET_RING = RingMixtureSpec(K=6, radius=1.0)


def sample_ring(spec: RingMixtureSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` points: uniform lobe, Normal angle around it, Normal radius."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = rng.integers(0, spec.K, size=n)
    angle = 2.0 * np.pi * k / spec.K + spec.sigma_ang * rng.standard_normal(n)
    r = spec.radius + spec.sigma_rad * rng.standard_normal(n)
    return np.stack([r * np.cos(angle), r * np.sin(angle)], axis=1)


@dataclass
class TrainingBatch:
    x0: np.ndarray
    x1: np.ndarray
    t: np.ndarray
    xt: np.ndarray
    u: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def rectify(x0: np.ndarray, x1: np.ndarray, t: np.ndarray) -> TrainingBatch:
    """Straight-line states and constant velocities for given pairs and times."""
    xt = (1.0 - t)[:, None] * x0 + t[:, None] * x1
    return TrainingBatch(x0, x1, t, xt, x1 - x0)


def make_batch(
    src: RingMixtureSpec,
    tgt: RingMixtureSpec,
    B: int,
    rng: np.random.Generator,
    time_rng: np.random.Generator | None = None,
) -> TrainingBatch:
    """Independent source/target draws with uniform times.

    Times come from ``time_rng`` when given so the pair stream and the time
    stream can be replayed separately.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    x0 = sample_ring(src, B, rng)
    x1 = sample_ring(tgt, B, rng)
    t = (time_rng or rng).uniform(0.0, 1.0, size=B)
    return rectify(x0, x1, t)


def dump_pairs_csv(path: str | Path, x0: np.ndarray, x1: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0_1", "x0_2", "x1_1", "x1_2"])
        for a, b in zip(x0, x1):
            w.writerow([repr(float(a[0])), repr(float(a[1])), repr(float(b[0])), repr(float(b[1]))])
