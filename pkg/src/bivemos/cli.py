"""Command-line interface.

Subcommands: ``simulate`` (synthetic dataset generation), ``calibrate``
(rolling-window fitting, models written as JSON), ``verify`` (score fitted
models plus the raw ensemble into a TSV report and rank-histogram files)
and ``bench`` (per-day estimation-time summaries).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import _kernels
from .emos import GroupSpec
from .optimize import QUASI_NEWTON, SIMPLEX, OptimizerConfig
from .pipeline import (
    METHODS,
    RAW,
    ExperimentConfig,
    FittedModels,
    TimingSummary,
    build_window_plan,
    load_dataset,
    rolling_calibrate,
    save_dataset,
    score_methods,
    synthesize_dataset,
)
from .synthetic import SyntheticSpec
from .verification import write_rank_histogram_tsv, write_report_tsv


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bivemos",
        description="Joint calibration of wind speed and temperature ensemble forecasts",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset CSV")
    p.add_argument("--spec", required=True, help="generator config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("calibrate", help="fit one method on rolling windows")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=[m for m in METHODS if m != RAW])
    p.add_argument("--train-days", type=int, default=40)
    p.add_argument("--groups", default=None, help="group sizes, e.g. '1,10' or '1x8'")
    p.add_argument("--optimizer", default=SIMPLEX, choices=[SIMPLEX, QUASI_NEWTON])
    p.add_argument("--corr-history", default=None, help="history CSV (copula only)")
    p.add_argument("--pooled-history", action="store_true",
                   help="estimate the copula correlation from one pooled margin fit")
    p.add_argument("--warm-start", action="store_true",
                   help="start each day's scale parameters at the previous day's fit")
    p.add_argument("--jobs", type=int, default=1,
                   help="fit independent dates in N parallel processes")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("verify", help="score fitted models against a dataset")
    p.add_argument("--models", required=True, help="directory holding <method>.models.json")
    p.add_argument("--data", required=True)
    p.add_argument("--groups", default=None)
    p.add_argument("--es-samples", type=int, default=10000)
    p.add_argument("--rank-samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=20120512)
    p.add_argument("--out", required=True, help="report TSV path")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("bench", help="per-day estimation-time benchmark")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", required=True, help="comma list of methods")
    p.add_argument("--optimizer", default=SIMPLEX,
                   help=f"'{SIMPLEX}', '{QUASI_NEWTON}' or a comma list")
    p.add_argument("--train-days", type=int, default=40)
    p.add_argument("--groups", default=None)
    p.add_argument("--max-evals", type=int, default=None)
    p.add_argument("--corr-history", default=None)
    p.set_defaults(func=_cmd_bench)
    return parser


def _groups_arg(args) -> list[int] | None:
    if args.groups is None:
        return None
    return list(GroupSpec.from_text(args.groups).group_sizes)


def _cmd_simulate(args) -> int:
    spec = SyntheticSpec.from_json(args.spec)
    dataset = synthesize_dataset(spec, args.seed)
    save_dataset(dataset, args.out)
    print(
        f"wrote {len(dataset.cases)} cases "
        f"({len(dataset.dates)} days x {spec.n_stations} stations, "
        f"M={dataset.groups.n_members}) to {args.out}"
    )
    return 0


def _experiment_config(args, optimizer_method: str) -> ExperimentConfig:
    corr_history = None
    if getattr(args, "corr_history", None):
        corr_history = load_dataset(args.corr_history, _groups_arg(args))
    return ExperimentConfig(
        train_days=args.train_days,
        optimizer=OptimizerConfig(
            method=optimizer_method,
            max_evals=getattr(args, "max_evals", None),
        ),
        corr_history=corr_history,
        copula_pooled_history=getattr(args, "pooled_history", False),
        warm_start_previous_day=getattr(args, "warm_start", False),
        jobs=getattr(args, "jobs", 1),
    )


def _cmd_calibrate(args) -> int:
    dataset = load_dataset(args.data, _groups_arg(args))
    plan = build_window_plan(dataset, args.train_days)
    cfg = _experiment_config(args, args.optimizer)
    fitted = rolling_calibrate(dataset, plan, args.method, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.method}.models.json"
    fitted.to_json(path)
    summary = TimingSummary.from_records(args.method, args.optimizer, fitted.timings)
    print(
        f"fitted {len(fitted.models)} dates -> {path} "
        f"(median {summary.median:.3f} s, mean {summary.mean:.3f} s per day)"
    )
    return 0


def _cmd_verify(args) -> int:
    models_dir = Path(args.models)
    model_files = sorted(models_dir.glob("*.models.json"))
    if not model_files:
        raise ValueError(f"no <method>.models.json files found in {models_dir}")
    fitted = {}
    for path in model_files:
        models = FittedModels.from_json(path)
        fitted[models.method] = models
    sizes = {m.group_sizes for m in fitted.values()}
    if len(sizes) > 1:
        raise ValueError(f"models in {models_dir} disagree on group sizes: {sorted(sizes)}")
    group_sizes = next(iter(sizes))
    dataset = load_dataset(args.data, group_sizes)

    common_dates = set.intersection(*(set(m.models) for m in fitted.values()))
    cases = [
        c for c in dataset.cases if c.date in common_dates and c.observation is not None
    ]
    if not cases:
        raise ValueError("no scoreable cases: models and data share no observed dates")
    fitted[RAW] = FittedModels(
        method=RAW,
        group_sizes=group_sizes,
        train_days=next(iter(fitted.values())).train_days,
        models={d: None for d in common_dates},
        timings=[],
    )
    cfg = ExperimentConfig(
        es_samples=args.es_samples, rank_samples=args.rank_samples, seed=args.seed
    )
    reports, histograms = score_methods(cases, dataset.groups, fitted, cfg)
    write_report_tsv(reports, args.out)
    out_dir = Path(args.out).parent
    stem = Path(args.out).stem
    for method, hist in histograms.items():
        write_rank_histogram_tsv(hist, out_dir / f"{stem}.ranks.{method}.tsv")
    print(f"scored {len(cases)} cases for {', '.join(reports)} -> {args.out}")
    return 0


def _cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    optimizers = [o.strip() for o in args.optimizer.split(",") if o.strip()]
    for o in optimizers:
        if o not in (SIMPLEX, QUASI_NEWTON):
            raise ValueError(f"unknown optimizer {o!r}")
    dataset = load_dataset(args.data, _groups_arg(args))
    plan = build_window_plan(dataset, args.train_days)
    print(f"kernel backend: {_kernels.BACKEND}")
    print("method\toptimizer\tmedian_s\tmean_s\tstd_s\tn_days")
    for method in methods:
        for opt in optimizers:
            cfg = _experiment_config(args, opt)
            fitted = rolling_calibrate(dataset, plan, method, cfg)
            s = TimingSummary.from_records(method, opt, fitted.timings)
            print(
                f"{method}\t{opt}\t{s.median:.4f}\t{s.mean:.4f}\t{s.std:.4f}\t{s.n_days}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
