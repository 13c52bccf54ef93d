"""Angular and radial diagnostics for samples on a K-lobe ring."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(phi):
    """Map angles into (-pi, pi]; both +pi and -pi map to +pi."""
    phi = np.asarray(phi, dtype=np.float64)
    out = phi + TWO_PI * np.floor((np.pi - phi) / TWO_PI)
    return out if out.ndim else float(out)


def polar_angle(points: np.ndarray) -> np.ndarray:
    """atan2 angle of each row, in [0, 2pi)."""
    return np.mod(np.arctan2(points[:, 1], points[:, 0]), TWO_PI)


def nearest_lobe_residual(theta, K: int):
    """Index of the nearest lobe center ``2 pi k / K`` and the wrapped residual.

    Ties (within 1e-12) go to the smaller k. Works on scalars or arrays.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    theta = np.asarray(theta, dtype=np.float64)
    centers = TWO_PI * np.arange(K) / K
    res = wrap_angle(theta[..., None] - centers)
    res = np.asarray(res)
    dist = np.abs(res)
    best = dist.min(axis=-1, keepdims=True)
    k_star = np.argmax(dist <= best + 1e-12, axis=-1)
    r = np.take_along_axis(res, k_star[..., None], axis=-1)[..., 0]
    if theta.ndim == 0:
        return int(k_star), float(r)
    return k_star, r


def lobe_distance(theta, K: int) -> np.ndarray:
    return np.abs(nearest_lobe_residual(theta, K)[1])


def circular_std(residuals) -> float:
    """sqrt(-2 ln R) with R the mean resultant length.

    A resultant below 1e-12 (e.g. antipodal pairs) is treated as zero.
    """
    r = np.asarray(residuals, dtype=np.float64)
    if r.size == 0:
        raise ValueError("circular_std of an empty set")
    R = np.hypot(np.mean(np.cos(r)), np.mean(np.sin(r)))
    if R <= 1e-12:
        raise ValueError("undefined circular spread (resultant length is zero)")
    return float(np.sqrt(-2.0 * np.log(min(R, 1.0))))


def calibrate_threshold(true_abs_residuals, quantile: float = 0.99) -> float:
    """Empirical quantile with linear interpolation between order statistics."""
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    a = np.asarray(true_abs_residuals, dtype=np.float64)
    if a.size == 0:
        raise ValueError("cannot calibrate on an empty set")
    return float(np.quantile(a, quantile, method="linear"))


def gap_rate(model_angles, tau: float, K: int) -> float:
    """Fraction of angles farther than ``tau`` from every lobe center."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return float(np.mean(lobe_distance(model_angles, K) > tau))


def w1_1d(a, b) -> float:
    """Wasserstein-1 between two empirical distributions on the line.

    Equal sizes use sorted matching. Otherwise the CDF difference is
    integrated exactly over the merged support, which equals the integral of
    the quantile-function difference.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("w1_1d needs nonempty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    grid = np.sort(np.concatenate([a, b]))
    widths = np.diff(grid)
    fa = np.searchsorted(a, grid[:-1], side="right") / a.size
    fb = np.searchsorted(b, grid[:-1], side="right") / b.size
    return float(np.sum(np.abs(fa - fb) * widths))


def rmse_sigma(sigma_model, sigma_true, weights=None) -> float:
    sm = np.atleast_1d(np.asarray(sigma_model, dtype=np.float64))
    st = np.atleast_1d(np.asarray(sigma_true, dtype=np.float64))
    w = np.ones_like(sm) / sm.size if weights is None else np.atleast_1d(np.asarray(weights, dtype=np.float64))
    if not np.isclose(w.sum(), 1.0):
        raise ValueError("weights must sum to 1")
    return float(np.sqrt(np.sum(w * (sm - st) ** 2)))


def radial_errors(model_points: np.ndarray, true_points: np.ndarray) -> tuple[float, float]:
    if len(model_points) != len(true_points):
        raise ValueError(f"count mismatch: {len(model_points)} model vs {len(true_points)} true points")
    d = np.linalg.norm(model_points, axis=1) - np.linalg.norm(true_points, axis=1)
    return float(np.mean(d * d)), float(np.mean(np.abs(d)))


@dataclass
class MetricsReport:
    rmse_sigma: float
    sigma_model: float
    sigma_true: float
    gap_rate: float
    w1_abs: float
    w1_signed: float
    radial_mse: float
    radial_mae: float
    n_samples: int

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[str]:
        return [repr(v) for v in asdict(self).values()]


def report(model_points: np.ndarray, true_points: np.ndarray, K: int = 6, quantile: float = 0.99) -> MetricsReport:
    """All diagnostics for one set of generated points against ground truth."""
    _, r_true = nearest_lobe_residual(polar_angle(true_points), K)
    _, r_model = nearest_lobe_residual(polar_angle(model_points), K)
    s_true = circular_std(r_true)
    s_model = circular_std(r_model)
    tau = calibrate_threshold(np.abs(r_true), quantile)
    mse, mae = radial_errors(model_points, true_points)
    return MetricsReport(
        rmse_sigma=rmse_sigma(s_model, s_true),
        sigma_model=s_model,
        sigma_true=s_true,
        gap_rate=gap_rate(polar_angle(model_points), tau, K),
        w1_abs=w1_1d(np.abs(r_true), np.abs(r_model)),
        w1_signed=w1_1d(r_true, r_model),
        radial_mse=mse,
        radial_mae=mae,
        n_samples=len(model_points),
    )
