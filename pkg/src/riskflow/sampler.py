"""Fixed-step Euler / RK4 integration of dx/dt = v(x, t) from t=0 to t=1."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Field = Callable[[np.ndarray, float], np.ndarray]


class IntegrationError(FloatingPointError):
    def __init__(self, step: int) -> None:
        self.step = step
        super().__init__(f"non-finite state at integration step {step}")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"
    num_steps: int = 100

    def __post_init__(self):
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")


def integrate(field: Field, x0: np.ndarray, cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Push ``x0`` (n, d) through the flow of ``field`` on a uniform grid over [0, 1].

    ``field(x, t)`` receives the whole batch and a scalar time.
    """
    x = np.array(x0, dtype=np.float64)
    h = 1.0 / cfg.num_steps
    for i in range(cfg.num_steps):
        t = i * h
        if cfg.method == "euler":
            x = x + h * field(x, t)
        else:
            k1 = field(x, t)
            k2 = field(x + 0.5 * h * k1, t + 0.5 * h)
            k3 = field(x + 0.5 * h * k2, t + 0.5 * h)
            k4 = field(x + h * k3, t + h)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(i)
    return x
