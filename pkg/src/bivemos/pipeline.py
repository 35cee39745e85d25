"""Dataset ingestion, rolling-window calibration, method dispatch and the
experiment driver producing verification reports and timing summaries.

CSV schema: header ``date,station,obs_wind,obs_temp,m1_wind,m1_temp,...``;
dates ISO-8601; a missing observation is encoded as empty obs fields (the
case is usable for prediction, excluded from training and scoring).
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import statistics
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .copula import CopulaModel, copula_sample, estimate_correlation
from .distributions import InvalidScaleError, tbn_moments, tbn_sample
from .emos import (
    TEMP,
    WIND,
    BivariateEmosParams,
    ForecastCase,
    GroupSpec,
    UnivariateEmosParams,
    fit_bivariate,
    fit_univariate,
    predictive_law,
)
from .optimize import OptimizerConfig
from .synthetic import SyntheticSpec, synthesize_dataset as _synthesize_cases
from .verification import (
    DEFAULT_ES_SAMPLES,
    DEFAULT_RANK_SAMPLES,
    RankHistogram,
    ScoreReport,
    score_forecasts,
    score_raw_ensemble,
)

__all__ = [
    "METHODS",
    "BIVARIATE_EMOS",
    "INDEPENDENT_EMOS",
    "COPULA",
    "RAW",
    "Dataset",
    "WindowPlan",
    "TimingRecord",
    "TimingSummary",
    "FittedModels",
    "ExperimentConfig",
    "ExperimentResult",
    "load_dataset",
    "save_dataset",
    "build_window_plan",
    "rolling_calibrate",
    "synthesize_dataset",
    "run_experiment",
]

log = logging.getLogger(__name__)

BIVARIATE_EMOS = "bivariate-emos"
INDEPENDENT_EMOS = "independent-emos"
COPULA = "copula"
RAW = "raw"
METHODS = (BIVARIATE_EMOS, INDEPENDENT_EMOS, COPULA, RAW)

DEFAULT_TRAIN_DAYS = 40


@dataclass(frozen=True)
class Dataset:
    """Forecast cases sorted by date then station, sharing one group spec."""

    cases: tuple[ForecastCase, ...]
    groups: GroupSpec
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ordered = tuple(sorted(self.cases, key=lambda c: (c.date, c.station)))
        seen = set()
        for case in ordered:
            key = (case.date, case.station)
            if key in seen:
                raise ValueError(f"duplicate case for {key}")
            seen.add(key)
            if case.n_members != self.groups.n_members:
                raise ValueError(
                    f"case {key} has {case.n_members} members, spec expects "
                    f"{self.groups.n_members}"
                )
        object.__setattr__(self, "cases", ordered)

    @property
    def dates(self) -> tuple[dt.date, ...]:
        out = []
        for case in self.cases:
            if not out or case.date != out[-1]:
                out.append(case.date)
        return tuple(out)

    def cases_on(self, date: dt.date) -> tuple[ForecastCase, ...]:
        return tuple(c for c in self.cases if c.date == date)

    def observed_cases(self) -> tuple[ForecastCase, ...]:
        return tuple(c for c in self.cases if c.observation is not None)


# ---------------------------------------------------------------------------
# CSV ingestion

def load_dataset(path, group_sizes: Sequence[int] | None = None) -> Dataset:
    """Read the CSV schema above into a Dataset.

    Structural problems (missing columns, empty file, inconsistent member
    count) raise; rows violating case invariants are rejected with
    line-numbered diagnostics collected in ``metadata['rejected_rows']``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        n_members = _validate_header(path, header)
        groups = (
            GroupSpec.from_sizes(group_sizes)
            if group_sizes is not None
            else GroupSpec.distinguishable(n_members)
        )
        if groups.n_members != n_members:
            raise ValueError(
                f"{path}: file has {n_members} members per case but the group "
                f"spec covers {groups.n_members}"
            )
        cases: list[ForecastCase] = []
        seen: set[tuple[dt.date, str]] = set()
        rejected: list[tuple[int, str]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)} "
                    f"(inconsistent member count)"
                )
            try:
                case = _parse_row(row, n_members)
            except ValueError as exc:
                rejected.append((lineno, str(exc)))
                log.warning("%s:%d: rejected row: %s", path, lineno, exc)
                continue
            key = (case.date, case.station)
            if key in seen:
                rejected.append((lineno, f"duplicate case for {key}"))
                log.warning("%s:%d: rejected duplicate case for %s", path, lineno, key)
                continue
            seen.add(key)
            cases.append(case)
    if not cases:
        raise ValueError(f"{path}: no valid forecast cases")
    return Dataset(
        cases=tuple(cases),
        groups=groups,
        metadata={"source": str(path), "rejected_rows": rejected},
    )


def _validate_header(path, header: list[str]) -> int:
    fixed = ["date", "station", "obs_wind", "obs_temp"]
    if header[: len(fixed)] != fixed:
        raise ValueError(f"{path}: header must start with {','.join(fixed)}")
    member_cols = header[len(fixed):]
    if not member_cols or len(member_cols) % 2 != 0:
        raise ValueError(f"{path}: member columns must come in (wind, temp) pairs")
    n_members = len(member_cols) // 2
    for k in range(n_members):
        expect = (f"m{k + 1}_wind", f"m{k + 1}_temp")
        got = tuple(member_cols[2 * k : 2 * k + 2])
        if got != expect:
            raise ValueError(f"{path}: expected member columns {expect}, got {got}")
    return n_members


def _parse_row(row: list[str], n_members: int) -> ForecastCase:
    date = dt.date.fromisoformat(row[0].strip())
    station = row[1].strip()
    if not station:
        raise ValueError("empty station identifier")
    obs_fields = (row[2].strip(), row[3].strip())
    if obs_fields == ("", ""):
        observation = None
    elif "" in obs_fields:
        raise ValueError("observation must have both coordinates or neither")
    else:
        observation = np.array([float(obs_fields[0]), float(obs_fields[1])])
    members = np.array([float(v) for v in row[4:]], dtype=float).reshape(n_members, 2)
    return ForecastCase(date=date, station=station, members=members, observation=observation)


def save_dataset(dataset: Dataset, path) -> None:
    n_members = dataset.groups.n_members
    header = ["date", "station", "obs_wind", "obs_temp"]
    for k in range(n_members):
        header += [f"m{k + 1}_wind", f"m{k + 1}_temp"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for case in dataset.cases:
            obs = (
                ["", ""]
                if case.observation is None
                else [repr(float(case.observation[0])), repr(float(case.observation[1]))]
            )
            writer.writerow(
                [case.date.isoformat(), case.station, *obs]
                + [repr(float(v)) for v in case.members.ravel()]
            )


def synthesize_dataset(spec: SyntheticSpec, seed: int) -> Dataset:
    """Dataset drawn from the generating model described by ``spec``."""
    cases = _synthesize_cases(spec, seed)
    return Dataset(
        cases=tuple(cases),
        groups=spec.group_spec(),
        metadata={"synthetic_seed": seed, "dispersion": spec.dispersion},
    )


# ---------------------------------------------------------------------------
# rolling windows

@dataclass(frozen=True)
class WindowPlan:
    """Rolling-window layout: training counts available days, skipping
    excluded ones; each verification date trains on the preceding
    ``training_length_days`` available days."""

    training_length_days: int
    available_dates: tuple[dt.date, ...]
    verification_dates: tuple[dt.date, ...]

    def training_dates(self, date: dt.date) -> tuple[dt.date, ...]:
        i = self.available_dates.index(date)
        if i < self.training_length_days:
            raise ValueError(f"{date} has fewer than {self.training_length_days} prior days")
        return self.available_dates[i - self.training_length_days : i]


def build_window_plan(dataset: Dataset, training_length_days: int = DEFAULT_TRAIN_DAYS) -> WindowPlan:
    if training_length_days < 1:
        raise ValueError("training_length_days must be >= 1")
    # only days with at least one observed case can serve as training days
    observed_dates = []
    for case in dataset.cases:
        if case.observation is not None:
            if not observed_dates or case.date != observed_dates[-1]:
                observed_dates.append(case.date)
    verification = tuple(observed_dates[training_length_days:])
    if not verification:
        raise ValueError(
            f"dataset spans {len(observed_dates)} observed days, not enough for a "
            f"{training_length_days}-day training window"
        )
    return WindowPlan(
        training_length_days=training_length_days,
        available_dates=tuple(observed_dates),
        verification_dates=verification,
    )


@dataclass(frozen=True)
class TimingRecord:
    date: dt.date
    method: str
    seconds: float


@dataclass(frozen=True)
class TimingSummary:
    method: str
    optimizer: str
    median: float
    mean: float
    std: float
    n_days: int

    @classmethod
    def from_records(cls, method: str, optimizer: str, records: Sequence[TimingRecord]):
        secs = [r.seconds for r in records]
        return cls(
            method=method,
            optimizer=optimizer,
            median=statistics.median(secs) if secs else float("nan"),
            mean=statistics.fmean(secs) if secs else float("nan"),
            std=statistics.stdev(secs) if len(secs) > 1 else 0.0,
            n_days=len(secs),
        )


# ---------------------------------------------------------------------------
# calibration

@dataclass(frozen=True)
class ExperimentConfig:
    train_days: int = DEFAULT_TRAIN_DAYS
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    es_samples: int = DEFAULT_ES_SAMPLES
    rank_samples: int = DEFAULT_RANK_SAMPLES
    seed: int = 20120512
    corr_history: "Dataset | None" = None
    copula_pooled_history: bool = False
    univariate_nonneg_coeffs: bool = False
    warm_start_previous_day: bool = False
    # per-date fits are independent; jobs > 1 runs them in a process pool.
    # The default stays serial for clean per-day timing benchmarks.
    jobs: int = 1


@dataclass
class FittedModels:
    """Per-date fitted parameters for one method, plus timing records."""

    method: str
    group_sizes: tuple[int, ...]
    train_days: int
    models: dict  # date -> payload
    timings: list[TimingRecord]
    gamma: float | None = None

    def groups(self) -> GroupSpec:
        return GroupSpec.from_sizes(self.group_sizes)

    def to_json(self, path) -> None:
        payload = {
            "method": self.method,
            "group_sizes": list(self.group_sizes),
            "train_days": self.train_days,
            "gamma": self.gamma,
            "timings": [
                {"date": r.date.isoformat(), "seconds": r.seconds} for r in self.timings
            ],
            "dates": {d.isoformat(): _model_to_json(self.method, m) for d, m in self.models.items()},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)

    @classmethod
    def from_json(cls, path) -> "FittedModels":
        with open(path) as fh:
            payload = json.load(fh)
        method = payload["method"]
        models = {
            dt.date.fromisoformat(key): _model_from_json(method, val)
            for key, val in payload["dates"].items()
        }
        timings = [
            TimingRecord(dt.date.fromisoformat(t["date"]), method, t["seconds"])
            for t in payload.get("timings", [])
        ]
        return cls(
            method=method,
            group_sizes=tuple(payload["group_sizes"]),
            train_days=payload["train_days"],
            models=models,
            timings=timings,
            gamma=payload.get("gamma"),
        )


def _model_to_json(method: str, model) -> dict:
    if method == BIVARIATE_EMOS:
        return {
            "a": model.a.tolist(),
            "b": [bk.tolist() for bk in model.b],
            "c_factor": model.c_factor.tolist(),
            "d": model.d.tolist(),
        }
    if method in (INDEPENDENT_EMOS, COPULA):
        out = {}
        for var, params in model.items():
            out[var] = {
                "intercept": params.intercept,
                "member_coeffs": list(params.member_coeffs),
                "var_c": params.var_c,
                "var_d": params.var_d,
            }
        return out
    raise ValueError(f"method {method!r} has no serializable models")


def _model_from_json(method: str, payload: dict):
    if method == BIVARIATE_EMOS:
        return BivariateEmosParams(
            a=np.array(payload["a"]),
            b=tuple(np.array(bk) for bk in payload["b"]),
            c_factor=np.array(payload["c_factor"]),
            d=np.array(payload["d"]),
        )
    if method in (INDEPENDENT_EMOS, COPULA):
        return {
            var: UnivariateEmosParams(
                variable=var,
                intercept=p["intercept"],
                member_coeffs=tuple(p["member_coeffs"]),
                var_c=p["var_c"],
                var_d=p["var_d"],
            )
            for var, p in payload.items()
        }
    raise ValueError(f"method {method!r} has no serializable models")


def _training_cases(dataset: Dataset, plan: WindowPlan, date: dt.date):
    window = set(plan.training_dates(date))
    return [c for c in dataset.cases if c.date in window and c.observation is not None]


def _fit_one_date(method, training, groups, cfg: ExperimentConfig, scale_init):
    """One window's estimation; returns (payload, seconds) or raises."""
    if method == BIVARIATE_EMOS:
        t0 = time.perf_counter()
        fit = fit_bivariate(training, groups, cfg.optimizer, scale_init=scale_init)
        return fit.params, time.perf_counter() - t0
    t0 = time.perf_counter()
    wind_fit = fit_univariate(
        training, WIND, groups, cfg.optimizer, cfg.univariate_nonneg_coeffs
    )
    temp_fit = fit_univariate(
        training, TEMP, groups, cfg.optimizer, cfg.univariate_nonneg_coeffs
    )
    payload = {WIND: wind_fit.params, TEMP: temp_fit.params}
    return payload, time.perf_counter() - t0


def rolling_calibrate(
    dataset: Dataset,
    plan: WindowPlan,
    method: str,
    cfg: ExperimentConfig | None = None,
) -> FittedModels:
    """Fit one method on every verification date's preceding window,
    pooling all stations (regional estimation).  Wall-clock time of the
    estimation call alone is recorded per date.  Windows with fewer cases
    than free parameters are skipped with a diagnostic.

    ``cfg.jobs > 1`` fits the (independent) dates in a process pool;
    the previous-day warm start forces serial execution.
    """
    cfg = cfg or ExperimentConfig()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    groups = dataset.groups
    fitted = FittedModels(
        method=method,
        group_sizes=groups.group_sizes,
        train_days=plan.training_length_days,
        models={},
        timings=[],
    )
    if method == RAW:
        for date in plan.verification_dates:
            fitted.models[date] = None
            fitted.timings.append(TimingRecord(date, method, 0.0))
        return fitted
    if method == COPULA:
        fitted.gamma = _copula_gamma(cfg)

    windows = {
        date: _training_cases(dataset, plan, date) for date in plan.verification_dates
    }
    parallel = cfg.jobs > 1 and not cfg.warm_start_previous_day
    if parallel:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {
                date: pool.submit(_fit_one_date, method, training, groups, cfg, None)
                for date, training in windows.items()
            }
            for date in plan.verification_dates:
                try:
                    payload, elapsed = futures[date].result()
                except ValueError as exc:
                    log.warning("%s: skipping %s (%s)", method, date, exc)
                    continue
                fitted.models[date] = payload
                fitted.timings.append(TimingRecord(date, method, elapsed))
    else:
        prev_scale = None
        for date in plan.verification_dates:
            try:
                payload, elapsed = _fit_one_date(
                    method,
                    windows[date],
                    groups,
                    cfg,
                    prev_scale if cfg.warm_start_previous_day else None,
                )
            except ValueError as exc:
                log.warning("%s: skipping %s (%s)", method, date, exc)
                continue
            fitted.models[date] = payload
            fitted.timings.append(TimingRecord(date, method, elapsed))
            if cfg.warm_start_previous_day and method == BIVARIATE_EMOS:
                prev_scale = (payload.c_factor, payload.d)
    if not fitted.models:
        raise ValueError(f"{method}: no verification date could be fitted")
    return fitted


def _copula_gamma(cfg: ExperimentConfig) -> float:
    """Latent correlation from the separate historical dataset, with the
    margins refitted on rolling windows (or one pooled fit)."""
    if cfg.corr_history is None:
        raise ValueError(
            "the copula method needs a correlation-history dataset "
            "(ExperimentConfig.corr_history / --corr-history)"
        )
    history = cfg.corr_history
    groups = history.groups
    pairs = []
    if cfg.copula_pooled_history:
        cases = list(history.observed_cases())
        wind_fit = fit_univariate(cases, WIND, groups, cfg.optimizer)
        temp_fit = fit_univariate(cases, TEMP, groups, cfg.optimizer)
        for case in cases:
            margins = (
                wind_fit.params.law_for(case, groups),
                temp_fit.params.law_for(case, groups),
            )
            pairs.append((margins, case.observation))
    else:
        plan = build_window_plan(history, cfg.train_days)
        for date in plan.verification_dates:
            training = _training_cases(history, plan, date)
            try:
                wind_fit = fit_univariate(training, WIND, groups, cfg.optimizer)
                temp_fit = fit_univariate(training, TEMP, groups, cfg.optimizer)
            except ValueError as exc:
                log.warning("copula history: skipping %s (%s)", date, exc)
                continue
            for case in history.cases_on(date):
                if case.observation is None:
                    continue
                margins = (
                    wind_fit.params.law_for(case, groups),
                    temp_fit.params.law_for(case, groups),
                )
                pairs.append((margins, case.observation))
    return estimate_correlation(pairs).gamma


# ---------------------------------------------------------------------------
# experiment driver

@dataclass
class ExperimentResult:
    reports: dict[str, ScoreReport]
    histograms: dict[str, RankHistogram]
    timing: dict[str, TimingSummary]
    fitted: dict[str, FittedModels]
    n_cases: int


def run_experiment(
    dataset: Dataset,
    plan: WindowPlan,
    methods: Sequence[str],
    cfg: ExperimentConfig | None = None,
) -> ExperimentResult:
    """Calibrate and verify each method on identical cases and scoring
    seeds; returns per-method reports, rank histograms, and per-day
    estimation-time summaries."""
    cfg = cfg or ExperimentConfig()
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    fitted = {m: rolling_calibrate(dataset, plan, m, cfg) for m in methods}
    common_dates = set(plan.verification_dates)
    for models in fitted.values():
        common_dates &= set(models.models)
    cases = [
        c
        for c in dataset.cases
        if c.date in common_dates and c.observation is not None
    ]
    if BIVARIATE_EMOS in fitted:
        cases = _drop_invalid_law_cases(cases, dataset.groups, fitted[BIVARIATE_EMOS])
    if not cases:
        raise ValueError("no verification cases shared by all methods")
    reports, histograms = score_methods(cases, dataset.groups, fitted, cfg)
    timing = {
        m: TimingSummary.from_records(m, cfg.optimizer.method, fitted[m].timings)
        for m in methods
    }
    return ExperimentResult(
        reports=reports,
        histograms=histograms,
        timing=timing,
        fitted=fitted,
        n_cases=len(cases),
    )


def _drop_invalid_law_cases(cases, groups, models: FittedModels):
    """Keep every method on identical cases: drop the (rare) cases whose
    fitted bivariate scale matrix degenerates at verification time."""
    kept = []
    for case in cases:
        try:
            predictive_law(models.models[case.date], case, groups)
        except InvalidScaleError as exc:
            log.warning(
                "dropping case %s/%s from all methods: %s", case.date, case.station, exc
            )
            continue
        kept.append(case)
    return kept


def score_methods(
    cases: Sequence[ForecastCase],
    groups: GroupSpec,
    fitted: dict[str, FittedModels],
    cfg: ExperimentConfig,
) -> tuple[dict[str, ScoreReport], dict[str, RankHistogram]]:
    """Score every fitted method on the same cases with the same seeds."""
    observations = np.array([c.observation for c in cases])
    reports: dict[str, ScoreReport] = {}
    histograms: dict[str, RankHistogram] = {}
    for method, models in fitted.items():
        if method == RAW:
            report, hist = score_raw_ensemble(
                [c.members for c in cases], observations, seed=cfg.seed
            )
        elif method == BIVARIATE_EMOS:
            laws = [
                predictive_law(models.models[c.date], c, groups) for c in cases
            ]

            def sampler(i, n, rng, _laws=laws):
                return tbn_sample(_laws[i], n, rng)

            def moments(i, _laws=laws):
                mom = tbn_moments(_laws[i])
                return mom.kappa, mom.xi

            report, hist = score_forecasts(
                observations,
                sampler,
                closed_moments=moments,
                es_samples=cfg.es_samples,
                rank_samples=cfg.rank_samples,
                seed=cfg.seed,
            )
        elif method in (INDEPENDENT_EMOS, COPULA):
            margins = [
                (
                    models.models[c.date][WIND].law_for(c, groups),
                    models.models[c.date][TEMP].law_for(c, groups),
                )
                for c in cases
            ]
            if method == COPULA:
                model = CopulaModel(gamma=models.gamma)

                def sampler(i, n, rng, _margins=margins, _model=model):
                    return copula_sample(_margins[i], _model, n, rng)

                closed = None  # the copula law has no closed-form joint moments
            else:

                def sampler(i, n, rng, _margins=margins):
                    law_w, law_t = _margins[i]
                    return np.column_stack([law_w.sample(n, rng), law_t.sample(n, rng)])

                def closed(i, _margins=margins):
                    law_w, law_t = _margins[i]
                    mean = np.array([law_w.mean(), law_t.mean()])
                    cov = np.diag([law_w.var(), law_t.var()])
                    return mean, cov

            report, hist = score_forecasts(
                observations,
                sampler,
                closed_moments=closed,
                es_samples=cfg.es_samples,
                rank_samples=cfg.rank_samples,
                seed=cfg.seed,
            )
        else:
            raise ValueError(f"unknown method {method!r}")
        reports[method] = report
        histograms[method] = hist
    return reports, histograms
