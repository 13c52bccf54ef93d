"""Exact finite-support checks of tilted (entropic) flow-matching identities.

Everything here is a closed-form finite sum, no sampling. A conditional law of
the velocity target at one space-time point is a :class:`DiscreteConditional`;
a :class:`DiscreteJoint` adds an outer distribution over points, each carrying
its own free prediction vector (a tabular model), so the gradient of the model
output with respect to parameters is the identity.

Weighted sums use ``math.fsum`` so that exactly symmetric supports cancel exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Quarter-decade steps from 0.1 down to 0.001.
LAMBDA_GRID = np.logspace(-1, -3, 9)
ERROR_FLOOR = 1e-13


class ExpansionExact(ArithmeticError):
    """All expansion errors are at the numerical floor, so no slope can be fit."""

    def __init__(self) -> None:
        super().__init__("expansion exact, slope undefined")


def _wsum(weights: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Exactly rounded ``sum_i weights[i] * rows[i]`` along the first axis."""
    terms = weights.reshape((-1,) + (1,) * (rows.ndim - 1)) * rows
    flat = terms.reshape(len(weights), -1)
    out = np.array([math.fsum(col) for col in flat.T])
    return out.reshape(rows.shape[1:])


@dataclass
class DiscreteConditional:
    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.points.shape[0] != self.probs.shape[0]:
            raise ValueError("points and probs differ in length")
        if np.any(self.probs <= 0):
            raise ValueError("probabilities must be positive")
        if abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class MomentSummary:
    mu: np.ndarray
    Sigma: np.ndarray
    S: np.ndarray


@dataclass
class DiscreteJoint:
    """Outer weights over locations, one conditional per location."""

    weights: np.ndarray
    conditionals: list[DiscreteConditional]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.weights) != len(self.conditionals):
            raise ValueError("one weight per conditional required")
        if np.any(self.weights <= 0) or abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")

    @property
    def dim(self) -> int:
        return self.conditionals[0].dim

    def __len__(self) -> int:
        return len(self.conditionals)


def _sq_dist(cond: DiscreteConditional, u) -> np.ndarray:
    diff = np.asarray(u, dtype=np.float64).reshape(1, -1) - cond.points
    return np.einsum("ij,ij->i", diff, diff)


def gibbs_weights(cond: DiscreteConditional, u, lam: float) -> np.ndarray:
    """beta_i = exp(lam * |u - U_i|^2) / sum_j p_j exp(lam * |u - U_j|^2)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    a = lam * _sq_dist(cond, u)
    e = np.exp(a - a.max())
    return e / math.fsum(cond.probs * e)


def tilted_mean(cond: DiscreteConditional, u, lam: float) -> np.ndarray:
    # Centered form mu + sum p_i beta_i (U_i - mu): symmetric pairs cancel exactly
    # under fsum, so the fixed point m_lambda = mu survives rounding.
    beta = gibbs_weights(cond, u, lam)
    mu = _wsum(cond.probs, cond.points)
    if lam == 0:
        return mu
    return mu + _wsum(cond.probs * beta, cond.points - mu)


def moments(cond: DiscreteConditional) -> MomentSummary:
    p = cond.probs
    mu = _wsum(p, cond.points)
    eps = cond.points - mu
    sigma = _wsum(p, eps[:, :, None] * eps[:, None, :])
    skew = _wsum(p, eps * np.einsum("ij,ij->i", eps, eps)[:, None])
    return MomentSummary(mu, sigma, skew)


def expansion_prediction(m: MomentSummary, u, lam: float) -> np.ndarray:
    """First-order tilted mean: mu + lam * S - 2 lam * Sigma (u - mu)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    u = np.asarray(u, dtype=np.float64).reshape(m.mu.shape)
    return m.mu + lam * m.S - 2.0 * lam * (m.Sigma @ (u - m.mu))


def loglog_slope(lams, errors, floor: float = ERROR_FLOOR) -> float:
    """Least-squares slope of log(error) against log(lambda), dropping errors below ``floor``."""
    lams = np.asarray(lams, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    keep = errors >= floor
    if keep.sum() < 2:
        raise ExpansionExact()
    slope, _ = np.polyfit(np.log(lams[keep]), np.log(errors[keep]), 1)
    return float(slope)


def expansion_errors(cond: DiscreteConditional, u, lambda_grid=LAMBDA_GRID) -> np.ndarray:
    m = moments(cond)
    return np.array(
        [np.linalg.norm(tilted_mean(cond, u, lam) - expansion_prediction(m, u, lam)) for lam in lambda_grid]
    )


def expansion_order_slope(cond: DiscreteConditional, u, lambda_grid=LAMBDA_GRID) -> float:
    return loglog_slope(lambda_grid, expansion_errors(cond, u, lambda_grid))


def _local_entropic(cond: DiscreteConditional, u, lam: float) -> float:
    a = lam * _sq_dist(cond, u)
    top = a.max()
    return (top + math.log(math.fsum(cond.probs * np.exp(a - top)))) / lam


def conditional_objective(joint: DiscreteJoint, theta, lam: float) -> float:
    """Outer mean of the per-location entropic risk of the squared error."""
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    theta = np.asarray(theta, dtype=np.float64)
    return math.fsum(w * _local_entropic(c, theta[i], lam) for i, (w, c) in enumerate(zip(joint.weights, joint.conditionals)))


def marginal_objective(joint: DiscreteJoint, theta, lam: float) -> float:
    """Entropic risk of the squared error under the full joint law."""
    if lam <= 0:
        raise ValueError("lambda must be > 0")
    theta = np.asarray(theta, dtype=np.float64)
    exps = [lam * _sq_dist(c, theta[i]) for i, c in enumerate(joint.conditionals)]
    top = max(a.max() for a in exps)
    total = math.fsum(
        w * p * e
        for w, c, a in zip(joint.weights, joint.conditionals, exps)
        for p, e in zip(c.probs, np.exp(a - top))
    )
    return (top + math.log(total)) / lam


def mse_objective(joint: DiscreteJoint, theta) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    return math.fsum(
        w * math.fsum(c.probs * _sq_dist(c, theta[i])) for i, (w, c) in enumerate(zip(joint.weights, joint.conditionals))
    )


def tilted_gradient(joint: DiscreteJoint, theta, lam: float) -> np.ndarray:
    """Closed-form gradient of :func:`conditional_objective`: 2 w_x (u_x - m_lambda(x)) per location."""
    theta = np.asarray(theta, dtype=np.float64)
    return np.stack(
        [2.0 * w * (theta[i] - tilted_mean(c, theta[i], lam)) for i, (w, c) in enumerate(zip(joint.weights, joint.conditionals))]
    )


def mse_gradient(joint: DiscreteJoint, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    return np.stack(
        [2.0 * w * (theta[i] - moments(c).mu) for i, (w, c) in enumerate(zip(joint.weights, joint.conditionals))]
    )


def gradient_gap_check(joint: DiscreteJoint, theta, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact tilted-minus-MSE gradient and its first-order (covariance + skew) prediction.

    Both are (num_locations, d) arrays.
    """
    theta = np.asarray(theta, dtype=np.float64)
    exact, first = [], []
    for i, (w, c) in enumerate(zip(joint.weights, joint.conditionals)):
        m = moments(c)
        exact.append(2.0 * w * (m.mu - tilted_mean(c, theta[i], lam)))
        first.append(2.0 * w * (-lam * m.S + 2.0 * lam * (m.Sigma @ (theta[i] - m.mu))))
    return np.stack(exact), np.stack(first)


def gradient_gap_errors(joint: DiscreteJoint, theta, lambda_grid=LAMBDA_GRID) -> np.ndarray:
    out = []
    for lam in lambda_grid:
        exact, first = gradient_gap_check(joint, theta, lam)
        out.append(np.linalg.norm(exact - first))
    return np.array(out)


def gradient_gap_slope(joint: DiscreteJoint, theta, lambda_grid=LAMBDA_GRID) -> float:
    return loglog_slope(lambda_grid, gradient_gap_errors(joint, theta, lambda_grid))


def ratio_expansion_check(N0: float, N1: float, D0: float, D1: float, lambda_grid=LAMBDA_GRID) -> float:
    """Slope of the error of the first-order expansion of (N0 + lam N1) / (D0 + lam D1)."""
    if D0 == 0:
        raise ZeroDivisionError("D0 must be nonzero")
    errors = [
        abs((N0 + lam * N1) / (D0 + lam * D1) - (N0 / D0 + lam * (N1 * D0 - N0 * D1) / D0**2))
        for lam in lambda_grid
    ]
    return loglog_slope(lambda_grid, errors)


def random_conditional(rng: np.random.Generator, n: int = 5, d: int = 2) -> DiscreteConditional:
    """Random support of ``n`` points in R^d with Dirichlet(1) probabilities."""
    probs = rng.dirichlet(np.ones(n))
    probs = probs / math.fsum(probs)
    return DiscreteConditional(rng.normal(size=(n, d)), probs)


def random_joint(rng: np.random.Generator, num_locations: int = 3, n: int = 4, d: int = 2) -> DiscreteJoint:
    w = rng.dirichlet(np.ones(num_locations))
    return DiscreteJoint(w / math.fsum(w), [random_conditional(rng, n, d) for _ in range(num_locations)])


# Small-lambda instances: random shape, with the overall scale fixed so that
# kappa = lam_max * max_i |u - U_i|^2 is small across the whole grid. Rescaling
# all points by s is the same as replacing lam by lam * s^2.
SMALL_KAPPA = 0.05


def small_lambda_conditional(
    rng: np.random.Generator, n: int = 5, d: int = 2, kappa: float = SMALL_KAPPA, lam_max: float = LAMBDA_GRID.max()
) -> tuple[DiscreteConditional, np.ndarray]:
    """Random (conditional, u) rescaled so ``lam_max * max |u - U_i|^2 == kappa``."""
    cond = random_conditional(rng, n, d)
    u = rng.normal(size=d)
    s = math.sqrt(kappa / (lam_max * _sq_dist(cond, u).max()))
    return DiscreteConditional(cond.points * s, cond.probs), u * s


def small_lambda_joint(
    rng: np.random.Generator,
    num_locations: int = 3,
    n: int = 4,
    d: int = 2,
    kappa: float = SMALL_KAPPA,
    lam_max: float = LAMBDA_GRID.max(),
) -> tuple[DiscreteJoint, np.ndarray]:
    """Random (joint, theta) rescaled so the largest ``lam_max * |theta_x - U|^2`` is ``kappa``."""
    joint = random_joint(rng, num_locations, n, d)
    theta = rng.normal(size=(num_locations, d))
    far = max(_sq_dist(c, theta[i]).max() for i, c in enumerate(joint.conditionals))
    s = math.sqrt(kappa / (lam_max * far))
    conds = [DiscreteConditional(c.points * s, c.probs) for c in joint.conditionals]
    return DiscreteJoint(joint.weights, conds), theta * s


def diagnostic_table(seed: int = 0, lambda_grid=LAMBDA_GRID) -> list[tuple[float, float, float]]:
    """(lambda, expansion error, gradient-gap error) on a seeded random 2-D problem."""
    rng = np.random.default_rng(seed)
    cond = random_conditional(rng, 5, 2)
    u = rng.normal(size=2)
    joint = random_joint(rng)
    theta = rng.normal(size=(len(joint), joint.dim))
    exp_err = expansion_errors(cond, u, lambda_grid)
    gap_err = gradient_gap_errors(joint, theta, lambda_grid)
    return [(float(l), float(a), float(b)) for l, a, b in zip(lambda_grid, exp_err, gap_err)]
