"""Flow-matching losses: per-sample squared error, MSE, and the tilted log-mean-exp."""

from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Tensor
from .data import TrainingBatch
from .model import VelocityField, forward

# Below this the 1/lambda form is replaced by the plain mean.
LAMBDA_EPS = 1e-12


@dataclass(frozen=True)
class LambdaSchedule:
    ramp_steps: int = 500
    lambda_max: float = 0.0

    def __post_init__(self):
        if self.ramp_steps < 1:
            raise ValueError("ramp_steps must be >= 1")
        if self.lambda_max < 0:
            raise ValueError("lambda_max must be >= 0")


def lambda_at(schedule: LambdaSchedule, step: int) -> float:
    """Linear ramp from 0 to ``lambda_max`` over ``ramp_steps`` steps, then constant."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if step < schedule.ramp_steps:
        return step / schedule.ramp_steps * schedule.lambda_max
    return schedule.lambda_max


def per_sample_losses(field: VelocityField, batch: TrainingBatch) -> Tensor:
    pred = forward(field, batch.xt, batch.t)
    return ad.square_norm_rows(ad.sub(pred, batch.u))


def mse_loss(losses: Tensor) -> Tensor:
    if losses.data.size == 0:
        raise ValueError("mse_loss of an empty vector")
    return ad.mean(losses)


def tilted_loss(losses: Tensor, lam: float) -> Tensor:
    """``(1/lam) * log(mean(exp(lam * losses)))``, or the mean when ``lam`` is ~0."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam < LAMBDA_EPS:
        return mse_loss(losses)
    return ad.scale(ad.logsumexp_mean(ad.scale(losses, lam)), 1.0 / lam)
