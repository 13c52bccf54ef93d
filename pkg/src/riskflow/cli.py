"""Command line entry point: train, eval, sweep, tiltlab, figure-gt."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .experiment import ExperimentConfig, _coerce, evaluate, format_config, generate, load_config, train
from .metrics import MetricsReport
from .model import VelocityField
from .sweep import emit_ground_truth_figure, run_sweep
from .tiltlab import diagnostic_table

CONFIG_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--fast", action="store_true", help="4000 iterations, 5000 eval samples")
    for name in CONFIG_FIELDS:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None, metavar="VALUE")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.fast:
        cfg = cfg.fast()
    updates = {k: _coerce(f, getattr(args, k)) for k, f in CONFIG_FIELDS.items() if getattr(args, k) is not None}
    return replace(cfg, **updates)


def _write_report(path: Path, rep: MetricsReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MetricsReport.header())
        w.writerow(rep.row())


def cmd_train(args) -> int:
    cfg = config_from_args(args)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "config.txt").write_text(format_config(cfg))
    result = train(cfg, log_every=args.log_every)
    result.field.save(args.out / "model.npz")
    np.savetxt(args.out / "losses.csv", np.column_stack([result.losses, result.mse_trace]),
               delimiter=",", header="loss,mse", comments="", fmt="%.17g")
    print(f"trained {cfg.iterations} steps in {result.wall_time:.1f}s; final loss {result.losses[-1]:.6f}")
    print(f"data digest {result.data_digest}")
    if not args.no_eval:
        rep = evaluate(result.field, cfg)
        _write_report(args.out / "metrics.csv", rep)
        print(rep)
    return 0


def cmd_eval(args) -> int:
    cfg = config_from_args(args)
    field = VelocityField.load(args.checkpoint)
    args.out.mkdir(parents=True, exist_ok=True)
    rep = evaluate(field, cfg)
    _write_report(args.out / "metrics.csv", rep)
    if args.samples:
        x0, x1 = generate(field, cfg)
        np.savetxt(args.out / "samples.csv", np.column_stack([x0, x1]), delimiter=",",
                   header="x0_1,x0_2,x1_1,x1_2", comments="", fmt="%.17g")
    print(rep)
    return 0


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    result = run_sweep(args.lambdas, args.seeds, cfg, args.out, workers=args.workers, checkpoints=args.checkpoints)
    for lam, imp in result.relative_improvement().items():
        print(f"lambda_max={lam:g} relative rmse_sigma improvement {imp:+.3f}")
    failed = [r for r in result.rows if r.error]
    for r in failed:
        print(f"FAILED lambda_max={r.lambda_max:g} seed={r.seed}: {r.error}", file=sys.stderr)
    print(f"wrote {args.out / 'sweep.csv'}")
    return 1 if failed else 0


def cmd_tiltlab(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "tiltlab.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "expansion_error", "gap_error"])
        for row in diagnostic_table(args.seed):
            w.writerow([repr(float(v)) for v in row])
    print(f"wrote {path}")
    return 0


def cmd_figure_gt(args) -> int:
    cfg = config_from_args(args)
    args.out.mkdir(parents=True, exist_ok=True)
    path = emit_ground_truth_figure(cfg, args.n, args.out / "fig_gt.svg")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one velocity field and evaluate it")
    _add_config_flags(p)
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--no-eval", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    _add_config_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--samples", action="store_true", help="also dump generated samples")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="paired lambda_max sweep over seeds")
    _add_config_flags(p)
    p.add_argument("--lambdas", type=_floats, default=[0.0, 0.05, 0.1, 0.2, 0.25, 0.3, 0.4])
    p.add_argument("--seeds", type=_ints, default=[0, 1, 2])
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--checkpoints", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tiltlab", help="expansion and gradient-gap errors over the lambda grid")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_tiltlab)

    p = sub.add_parser("figure-gt", help="ground-truth straight-line transport figure")
    _add_config_flags(p)
    p.add_argument("--n", type=int, default=64)
    p.set_defaults(func=cmd_figure_gt)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
