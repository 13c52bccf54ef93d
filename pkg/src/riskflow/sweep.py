"""Paired lambda_max sweeps: one fresh training run per (lambda_max, seed), CSV and figures."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import STREAM_DATA, make_rng, sample_ring
from .experiment import ExperimentConfig, evaluate, train
from .metrics import MetricsReport
from .plots import ground_truth_figure, line_plot

log = logging.getLogger(__name__)

SWEEP_HEADER = [
    "lambda_max",
    "seed",
    "rmse_sigma",
    "sigma_model",
    "sigma_true",
    "gap_rate",
    "w1_abs",
    "w1_signed",
    "radial_mse",
    "radial_mae",
    "wall_time_s",
]
METRIC_COLUMNS = SWEEP_HEADER[2:-1]


@dataclass
class SweepRow:
    lambda_max: float
    seed: int
    report: MetricsReport | None
    wall_time: float
    error: str | None = None

    def csv_row(self) -> list[str]:
        if self.report is None:
            metrics = ["nan"] * len(METRIC_COLUMNS)
        else:
            metrics = [repr(float(getattr(self.report, c))) for c in METRIC_COLUMNS]
        return [repr(float(self.lambda_max)), str(self.seed), *metrics, f"{self.wall_time:.3f}"]


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def table(self) -> dict[float, dict[str, np.ndarray]]:
        """Per lambda_max, each metric column as an array over seeds."""
        out: dict[float, dict[str, list]] = {}
        for r in self.rows:
            d = out.setdefault(r.lambda_max, {c: [] for c in METRIC_COLUMNS})
            for c in METRIC_COLUMNS:
                d[c].append(np.nan if r.report is None else getattr(r.report, c))
        return {k: {c: np.asarray(v) for c, v in d.items()} for k, d in sorted(out.items())}

    def means(self, column: str) -> tuple[np.ndarray, np.ndarray]:
        tab = self.table()
        lams = np.array(sorted(tab))
        vals = [tab[l][column] for l in lams]
        return lams, np.array([np.nanmean(v) if np.isfinite(v).any() else np.nan for v in vals])

    def relative_improvement(self, column: str = "rmse_sigma") -> dict[float, float]:
        """Mean over seeds of (baseline - risk) / baseline, paired by seed against lambda_max = 0."""
        base = {r.seed: getattr(r.report, column) for r in self.rows if r.lambda_max == 0 and r.report}
        acc: dict[float, list[float]] = {}
        for r in self.rows:
            if r.report is None or r.seed not in base:
                continue
            b = base[r.seed]
            acc.setdefault(r.lambda_max, []).append((b - getattr(r.report, column)) / b)
        return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


def run_one(cfg: ExperimentConfig, checkpoint_dir: str | None = None) -> SweepRow:
    try:
        result = train(cfg)
        rep = evaluate(result.field, cfg)
        if checkpoint_dir:
            result.field.save(Path(checkpoint_dir) / f"lam{cfg.lambda_max:g}_seed{cfg.seed}.npz")
        log.info("lambda_max=%g seed=%d rmse_sigma=%.5f (%.0fs)", cfg.lambda_max, cfg.seed, rep.rmse_sigma, result.wall_time)
        return SweepRow(cfg.lambda_max, cfg.seed, rep, result.wall_time)
    except Exception as exc:  # recorded per row; the sweep keeps going
        log.exception("run lambda_max=%g seed=%d failed", cfg.lambda_max, cfg.seed)
        return SweepRow(cfg.lambda_max, cfg.seed, None, math.nan, f"{type(exc).__name__}: {exc}")


def run_sweep(
    lambda_max_list,
    seeds,
    base_config: ExperimentConfig,
    out_dir: str | Path | None = None,
    workers: int | None = None,
    checkpoints: bool = False,
) -> SweepResult:
    """Train and evaluate every (lambda_max, seed) pair; write CSV and figures when ``out_dir`` is set."""
    lambda_max_list = list(lambda_max_list)
    seeds = list(seeds)
    if not lambda_max_list or not seeds:
        raise ValueError("need at least one lambda_max and one seed")
    configs = [replace(base_config, lambda_max=float(l), seed=int(s)) for l in lambda_max_list for s in seeds]
    ckpt = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if checkpoints:
            ckpt = out_dir / "checkpoints"
            ckpt.mkdir(exist_ok=True)
            ckpt = str(ckpt)
    workers = workers or min(os.cpu_count() or 1, len(configs))
    if workers <= 1:
        rows = [run_one(c, ckpt) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_one, configs, [ckpt] * len(configs)))
    result = SweepResult(rows)
    if out_dir is not None:
        write_sweep_csv(out_dir / "sweep.csv", result)
        write_sweep_figures(out_dir, result)
    return result


def write_sweep_csv(path: str | Path, result: SweepResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in result.rows:
            w.writerow(r.csv_row())


def read_sweep_csv(path: str | Path) -> SweepResult:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            vals = {c: float(rec[c]) for c in METRIC_COLUMNS}
            rep = None
            if not any(math.isnan(v) for v in vals.values()):
                rep = MetricsReport(**vals, n_samples=0)
            rows.append(SweepRow(float(rec["lambda_max"]), int(rec["seed"]), rep, float(rec["wall_time_s"])))
    return SweepResult(rows)


def write_sweep_figures(out_dir: str | Path, result: SweepResult) -> list[Path]:
    out_dir = Path(out_dir)
    tab = result.table()
    base = tab.get(0.0)
    pts_x = [r.lambda_max for r in result.rows if r.report]
    paths = []
    for name, col, label in [
        ("fig_rmse.svg", "rmse_sigma", "RMSE_sigma"),
        ("fig_gap.svg", "gap_rate", "gap violation rate"),
        ("fig_w1.svg", "w1_abs", "W1(|r|)"),
    ]:
        lams, means = result.means(col)
        pts_y = [getattr(r.report, col) for r in result.rows if r.report]
        paths.append(
            line_plot(
                out_dir / name,
                lams,
                means,
                title=f"{label} vs lambda_max",
                xlabel="lambda_max",
                ylabel=label,
                baseline=None if base is None else float(np.nanmean(base[col])),
                scatter=(pts_x, pts_y),
            )
        )
    rel = result.relative_improvement("rmse_sigma")
    if rel:
        lams = np.array(list(rel))
        paths.append(
            line_plot(
                out_dir / "fig_rel_improve.svg",
                lams,
                np.array(list(rel.values())),
                title="relative RMSE_sigma improvement vs lambda_max",
                xlabel="lambda_max",
                ylabel="(base - risk) / base",
                baseline=0.0,
            )
        )
    return paths


def emit_ground_truth_figure(cfg: ExperimentConfig, n: int, path: str | Path) -> Path:
    """Independent source/target pairs and their chords, drawn from the data stream of ``cfg.seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(cfg.seed, STREAM_DATA)
    x0 = sample_ring(cfg.source, n, rng)
    x1 = sample_ring(cfg.target, n, rng)
    return ground_truth_figure(path, x0, x1, cfg.r_tgt)
