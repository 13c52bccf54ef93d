"""AdamW with decoupled weight decay, operating in place on leaf tensors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .autodiff import Tensor


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"non-finite gradient for parameter {name!r}")


@dataclass
class AdamWState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    tolerant: bool = False
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(state: AdamWState, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]) -> None:
    """One AdamW update of ``params`` (in place) from ``grads`` keyed by parameter name.

    In tolerant mode non-finite gradient entries are zeroed instead of raising.
    """
    if set(grads) != set(params):
        raise KeyError(f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}")
    checked = {}
    for name, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        if not np.all(np.isfinite(g)):
            if not state.tolerant:
                raise NonFiniteGradientError(name)
            g = np.where(np.isfinite(g), g, 0.0)
        checked[name] = g

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    step_size = state.lr / bc1
    sqrt_bc2 = math.sqrt(bc2)
    for name, p in params.items():
        g = checked[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if state.weight_decay:
            p.data *= 1.0 - state.lr * state.weight_decay
        p.data -= step_size * m / (np.sqrt(v) / sqrt_bc2 + state.eps)
