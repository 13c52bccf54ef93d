"""MLP velocity field v(x, t) over the 2-D state and a sinusoidal time embedding."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass(frozen=True)
class SinusoidalEmbedding:
    num_frequencies: int = 8
    frequencies: tuple[float, ...] = ()

    def __post_init__(self):
        if self.num_frequencies < 1:
            raise ValueError("num_frequencies must be positive")
        if not self.frequencies:
            freqs = tuple(float(2.0**k * np.pi) for k in range(self.num_frequencies))
            object.__setattr__(self, "frequencies", freqs)
        if len(self.frequencies) != self.num_frequencies:
            raise ValueError("len(frequencies) must equal num_frequencies")
        if any(b <= a for a, b in zip(self.frequencies, self.frequencies[1:])):
            raise ValueError("frequencies must be strictly increasing")

    @property
    def dim(self) -> int:
        return 2 * self.num_frequencies


def embed_time(t, emb: SinusoidalEmbedding) -> np.ndarray:
    """Interleaved ``[sin(w1 t), cos(w1 t), ..., sin(wK t), cos(wK t)]``.

    Scalar ``t`` gives a vector of length ``emb.dim``; an array of B times gives (B, emb.dim).
    """
    t = np.asarray(t, dtype=np.float64)
    phase = t[..., None] * np.asarray(emb.frequencies)
    out = np.empty(phase.shape[:-1] + (emb.dim,))
    out[..., 0::2] = np.sin(phase)
    out[..., 1::2] = np.cos(phase)
    return out


@dataclass
class VelocityField:
    """Parameters of a tanh MLP mapping ``[x, embed(t)]`` to a 2-D velocity.

    ``params`` maps names ``W0, b0, W1, b1, ...`` to leaf tensors.
    """

    widths: tuple[int, ...]
    embedding: SinusoidalEmbedding
    params: dict[str, Tensor] = field(default_factory=dict)

    @property
    def num_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    def __call__(self, x: np.ndarray, t) -> np.ndarray:
        """Evaluate without recording; ``t`` may be a scalar shared by all rows."""
        x = np.asarray(x, dtype=np.float64)
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
        return forward(self, x, t).data

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def save(self, path: str | Path) -> None:
        """Write an ``.npz`` of named arrays plus the architecture."""
        arrays = {name: p.data for name, p in self.params.items()}
        np.savez(
            path,
            __widths__=np.asarray(self.widths),
            __frequencies__=np.asarray(self.embedding.frequencies),
            **arrays,
        )

    @classmethod
    def load(cls, path: str | Path) -> "VelocityField":
        with np.load(path) as z:
            widths = tuple(int(w) for w in z["__widths__"])
            freqs = tuple(float(f) for f in z["__frequencies__"])
            emb = SinusoidalEmbedding(len(freqs), freqs)
            params = {k: Tensor(z[k].copy(), requires_grad=True) for k in z.files if not k.startswith("__")}
        return cls(widths, emb, params)


def init_velocity_field(
    rng: np.random.Generator,
    hidden: tuple[int, ...] = (128, 128, 128),
    embedding: SinusoidalEmbedding | None = None,
    zero_last: bool = True,
) -> VelocityField:
    """Uniform fan-in (He) init for hidden layers, zeros for biases and (by default) the last layer."""
    embedding = embedding or SinusoidalEmbedding()
    widths = (2 + embedding.dim, *hidden, 2)
    params: dict[str, Tensor] = {}
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        last = i == len(widths) - 2
        if last and zero_last:
            w = np.zeros((fan_in, fan_out))
        else:
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"W{i}"] = Tensor(w, requires_grad=True)
        params[f"b{i}"] = Tensor(np.zeros(fan_out), requires_grad=True)
    return VelocityField(widths, embedding, params)


def forward(field: VelocityField, x, t) -> Tensor:
    """Batched velocity prediction, differentiable w.r.t. ``field.params``."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ad.ShapeError("forward (x must be (B, 2))", x.shape)
    if t.shape != (x.shape[0],):
        raise ad.ShapeError("forward (|x| != |t|)", x.shape, t.shape)
    h = Tensor(np.concatenate([x, embed_time(t, field.embedding)], axis=1))
    p = field.params
    n = field.num_layers
    for i in range(n):
        h = ad.add(ad.matmul(h, p[f"W{i}"]), p[f"b{i}"])
        if i < n - 1:
            h = ad.tanh(h)
    return h
