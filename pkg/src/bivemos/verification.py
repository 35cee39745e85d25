"""Multivariate verification scores and diagnostics: energy score (Monte
Carlo and exact ensemble forms), multivariate rank histograms with the
reliability index, determinant sharpness, spatial median and point-forecast
error/correlation summaries.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .optimize import OptimizerConfig, minimize

__all__ = [
    "RankHistogram",
    "ScoreReport",
    "energy_score_mc",
    "energy_score_ensemble",
    "multivariate_rank",
    "rank_histogram",
    "reliability_index",
    "delta_uniform_quantile",
    "determinant_sharpness",
    "spatial_median",
    "score_forecasts",
    "score_raw_ensemble",
    "write_report_tsv",
    "write_rank_histogram_tsv",
]

log = logging.getLogger(__name__)

DEFAULT_ES_SAMPLES = 10000
DEFAULT_RANK_SAMPLES = 100


def energy_score_mc(sample: np.ndarray, obs) -> float:
    """Monte Carlo energy score: mean distance to the observation minus the
    consecutive-pair spread term.  Single evaluations may be slightly
    negative; they are not clamped."""
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 2 or sample.shape[1] != 2:
        raise ValueError(f"sample must be (n, 2), got {sample.shape}")
    if sample.shape[0] < 2:
        raise ValueError("Monte Carlo energy score needs n >= 2")
    obs = np.asarray(obs, dtype=float)
    return _kernels.energy_score_mc(
        np.ascontiguousarray(sample[:, 0]),
        np.ascontiguousarray(sample[:, 1]),
        float(obs[0]),
        float(obs[1]),
    )


def energy_score_ensemble(members: np.ndarray, obs) -> float:
    """Exact energy score of a finite ensemble (double sum over pairs)."""
    members = np.asarray(members, dtype=float)
    if members.ndim != 2 or members.shape[1] != 2:
        raise ValueError(f"members must be (M, 2), got {members.shape}")
    obs = np.asarray(obs, dtype=float)
    return _kernels.energy_score_ensemble(
        np.ascontiguousarray(members[:, 0]),
        np.ascontiguousarray(members[:, 1]),
        float(obs[0]),
        float(obs[1]),
    )


def multivariate_rank(ensemble: np.ndarray, obs, rng) -> int:
    """Rank of the observation in the pooled set under pre-rank ordering.

    Pre-rank of a pooled vector = number of pooled vectors weakly dominated
    componentwise by it (including itself); the observation's rank among
    the pooled pre-ranks is returned, ties broken uniformly at random.
    """
    ensemble = np.asarray(ensemble, dtype=float)
    obs = np.asarray(obs, dtype=float)
    pool = np.vstack([ensemble, obs[None, :]])
    pr = _kernels.preranks(
        np.ascontiguousarray(pool[:, 0]), np.ascontiguousarray(pool[:, 1])
    )
    obs_pr = pr[-1]
    less = int((pr < obs_pr).sum())
    ties = int((pr == obs_pr).sum())  # includes the observation itself
    offset = int(rng.integers(ties)) if ties > 1 else 0
    return less + 1 + offset


@dataclass
class RankHistogram:
    """Counts of observation ranks over {1, ..., n_bins}."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.size < 1:
            raise ValueError("counts must be a nonempty 1-D array")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @classmethod
    def empty(cls, n_bins: int) -> "RankHistogram":
        return cls(np.zeros(n_bins, dtype=np.int64))

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def relative_freqs(self) -> np.ndarray:
        if self.total == 0:
            raise ValueError("empty histogram")
        return self.counts / self.total

    def add(self, rank: int) -> None:
        self.counts[rank - 1] += 1


def reliability_index(hist: RankHistogram) -> float:
    """L1 distance of the rank frequencies from uniformity."""
    rho = hist.relative_freqs
    return float(np.abs(rho - 1.0 / hist.n_bins).sum())


def delta_uniform_quantile(
    n_cases: int, n_bins: int, q: float = 0.99, n_sim: int = 20000, seed: int = 0
) -> float:
    """Quantile of the reliability index under exact rank uniformity, by
    multinomial simulation; the sampling-noise threshold for calibration
    checks at finite case counts."""
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n_cases, np.full(n_bins, 1.0 / n_bins), size=n_sim)
    delta = np.abs(counts / n_cases - 1.0 / n_bins).sum(axis=1)
    return float(np.quantile(delta, q))


def rank_histogram(
    observations: np.ndarray,
    sampler: Callable[[int, int, np.random.Generator], np.ndarray],
    samples_per_case: int = DEFAULT_RANK_SAMPLES,
    seed: int = 0,
) -> RankHistogram:
    """Rank histogram of observations against per-case predictive samples.

    ``sampler(i, n, rng)`` must return an (n, 2) sample for case ``i``;
    ranks land in {1, ..., samples_per_case + 1}.  Deterministic for a
    fixed seed.
    """
    if samples_per_case < 1:
        raise ValueError("samples_per_case must be >= 1")
    observations = np.asarray(observations, dtype=float)
    hist = RankHistogram.empty(samples_per_case + 1)
    for i in range(observations.shape[0]):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, 1)))
        sample = sampler(i, samples_per_case, rng)
        tie_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, 2)))
        hist.add(multivariate_rank(sample, observations[i], tie_rng))
    return hist


def determinant_sharpness(cov: np.ndarray) -> float:
    """det(cov)^(1/(2d)); the covariance is symmetrized first and a
    negative determinant from numerical asymmetry is clamped at zero."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got {cov.shape}")
    sym = 0.5 * (cov + cov.T)
    det = float(np.linalg.det(sym))
    d = cov.shape[0]
    return max(det, 0.0) ** (1.0 / (2 * d))


# ---------------------------------------------------------------------------
# spatial median

_MEDIAN_MAX_ITER = 2000
_MEDIAN_STEP_TOL = 1e-8  # coordinate stop; the objective is flat at the optimum


def spatial_median(points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Point minimizing the summed Euclidean distance to ``points``.

    Damped fixed-point reweighting with the anchor correction for iterates
    landing on data points; a direct simplex descent polishes the result
    if the fixed point stalls.  For collinear inputs the minimizer may be
    non-unique; a warning flags that case.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError(f"points must be (n, 2) with n >= 1, got {pts.shape}")
    if pts.shape[0] == 1 or np.all(pts == pts[0]):
        return pts[0].copy()
    _warn_if_collinear(pts)

    scale = float(np.abs(pts - pts.mean(axis=0)).max()) or 1.0
    anchor_eps = 1e-12 * scale

    def objective(a):
        return float(np.linalg.norm(pts - a, axis=1).sum())

    y = np.median(pts, axis=0)
    f = objective(y)
    stalled = False
    for _ in range(_MEDIAN_MAX_ITER):
        d = np.linalg.norm(pts - y, axis=1)
        on = d <= anchor_eps
        if on.any():
            free = ~on
            if not free.any():
                break
            w = 1.0 / d[free]
            t = (pts[free] * w[:, None]).sum(axis=0) / w.sum()
            r_vec = ((pts[free] - y) * w[:, None]).sum(axis=0)
            r = float(np.linalg.norm(r_vec))
            eta = float(on.sum())
            if r <= eta:  # the data point itself is the minimizer
                return y
            lam = eta / r
            y_new = (1.0 - lam) * t + lam * y
        else:
            w = 1.0 / d
            y_new = (pts * w[:, None]).sum(axis=0) / w.sum()
        f_new = objective(y_new)
        # damp overshoots
        halvings = 0
        while f_new > f and halvings < 30:
            y_new = 0.5 * (y + y_new)
            f_new = objective(y_new)
            halvings += 1
        if halvings >= 30 and f_new > f:
            stalled = True
            break
        done = (f - f_new) <= tol * max(1.0, abs(f)) and np.max(
            np.abs(y_new - y)
        ) <= _MEDIAN_STEP_TOL * (1.0 + np.max(np.abs(y)))
        y, f = y_new, f_new
        if done:
            break
    else:
        stalled = True

    if stalled:
        res = minimize(
            objective, y, OptimizerConfig(max_evals=2000, x_tol=1e-12, f_tol=1e-13)
        )
        if res.f_min < f:
            y = res.x_min
    return y


def _warn_if_collinear(pts: np.ndarray) -> None:
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] > 0 and sv[1] / sv[0] < 1e-12:
        warnings.warn("collinear points: spatial median may be non-unique", stacklevel=3)


# ---------------------------------------------------------------------------
# per-method verification fold

@dataclass(frozen=True)
class ScoreReport:
    """Verification summary for one method: probabilistic scores plus the
    Euclidean error and correlation summaries of median/mean forecasts."""

    mean_es: float
    delta: float
    mean_ds: float
    ee_median: float
    rho_median: float | None
    rho_err_median: float | None
    ee_mean: float
    rho_mean: float | None
    rho_err_mean: float | None
    n_cases: int


def _corr_or_none(a: np.ndarray, b: np.ndarray) -> float | None:
    if a.std() < 1e-12 or b.std() < 1e-12:
        return None
    return float(np.corrcoef(a, b)[0, 1])


def _summarize_points(points: np.ndarray, observations: np.ndarray):
    ee = float(np.linalg.norm(points - observations, axis=1).mean())
    rho = _corr_or_none(points[:, 0], points[:, 1])
    err = points - observations
    rho_err = _corr_or_none(err[:, 0], err[:, 1])
    return ee, rho, rho_err


def score_forecasts(
    observations: np.ndarray,
    sampler: Callable[[int, int, np.random.Generator], np.ndarray],
    closed_moments: Callable[[int], tuple[np.ndarray, np.ndarray]] | None = None,
    es_samples: int = DEFAULT_ES_SAMPLES,
    rank_samples: int = DEFAULT_RANK_SAMPLES,
    seed: int = 0,
) -> tuple[ScoreReport, RankHistogram]:
    """Score a sample-based predictive method over a case list.

    ``sampler(i, n, rng)`` draws from case i's predictive law.  When
    ``closed_moments`` is given it supplies the exact per-case mean vector
    and covariance (used for the mean forecast and determinant sharpness);
    otherwise both come from the scoring sample.  Median forecasts are
    always the spatial median of the sample.  Seeds are derived from
    (seed, case index) only, so two methods scored with the same seed see
    identical random streams.
    """
    observations = np.asarray(observations, dtype=float)
    n = observations.shape[0]
    if n == 0:
        raise ValueError("no cases to score")
    es = np.empty(n)
    ds = np.empty(n)
    medians = np.empty((n, 2))
    means = np.empty((n, 2))
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, 0)))
        sample = np.asarray(sampler(i, es_samples, rng), dtype=float)
        es[i] = energy_score_mc(sample, observations[i])
        medians[i] = spatial_median(sample, tol=1e-9)
        if closed_moments is not None:
            mean_i, cov_i = closed_moments(i)
        else:
            mean_i = sample.mean(axis=0)
            cov_i = np.cov(sample.T, ddof=1)
        means[i] = mean_i
        ds[i] = determinant_sharpness(cov_i)
    hist = rank_histogram(observations, sampler, rank_samples, seed)
    ee_med, rho_med, rho_err_med = _summarize_points(medians, observations)
    ee_mean, rho_mean, rho_err_mean = _summarize_points(means, observations)
    report = ScoreReport(
        mean_es=float(es.mean()),
        delta=reliability_index(hist),
        mean_ds=float(ds.mean()),
        ee_median=ee_med,
        rho_median=rho_med,
        rho_err_median=rho_err_med,
        ee_mean=ee_mean,
        rho_mean=rho_mean,
        rho_err_mean=rho_err_mean,
        n_cases=n,
    )
    return report, hist


def score_raw_ensemble(
    member_arrays: Sequence[np.ndarray],
    observations: np.ndarray,
    seed: int = 0,
) -> tuple[ScoreReport, RankHistogram]:
    """Score the raw ensemble: members act as the predictive sample, the
    energy score uses the exact double-sum form and ranks use the members
    directly (M + 1 bins)."""
    observations = np.asarray(observations, dtype=float)
    n = observations.shape[0]
    if n == 0:
        raise ValueError("no cases to score")
    m = member_arrays[0].shape[0]
    es = np.empty(n)
    ds = np.empty(n)
    medians = np.empty((n, 2))
    means = np.empty((n, 2))
    hist = RankHistogram.empty(m + 1)
    for i in range(n):
        members = np.asarray(member_arrays[i], dtype=float)
        es[i] = energy_score_ensemble(members, observations[i])
        tie_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, 2)))
        hist.add(multivariate_rank(members, observations[i], tie_rng))
        ds[i] = determinant_sharpness(np.cov(members.T, ddof=1))
        medians[i] = spatial_median(members, tol=1e-9)
        means[i] = members.mean(axis=0)
    ee_med, rho_med, rho_err_med = _summarize_points(medians, observations)
    ee_mean, rho_mean, rho_err_mean = _summarize_points(means, observations)
    report = ScoreReport(
        mean_es=float(es.mean()),
        delta=reliability_index(hist),
        mean_ds=float(ds.mean()),
        ee_median=ee_med,
        rho_median=rho_med,
        rho_err_median=rho_err_med,
        ee_mean=ee_mean,
        rho_mean=rho_mean,
        rho_err_mean=rho_err_mean,
        n_cases=n,
    )
    return report, hist


# ---------------------------------------------------------------------------
# report emission

_REPORT_COLUMNS = (
    "method",
    "es",
    "delta",
    "ds",
    "ee_median",
    "rho_median",
    "rho_err_median",
    "ee_mean",
    "rho_mean",
    "rho_err_mean",
    "n_cases",
)


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_report_tsv(reports: dict[str, ScoreReport], path) -> None:
    """One row per method, mirroring the probabilistic / median / mean
    column blocks of the verification tables."""
    lines = ["\t".join(_REPORT_COLUMNS)]
    for method, rep in reports.items():
        row = (
            method,
            rep.mean_es,
            rep.delta,
            rep.mean_ds,
            rep.ee_median,
            rep.rho_median,
            rep.rho_err_median,
            rep.ee_mean,
            rep.rho_mean,
            rep.rho_err_mean,
            rep.n_cases,
        )
        lines.append("\t".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_rank_histogram_tsv(hist: RankHistogram, path) -> None:
    with open(path, "w") as fh:
        fh.write("rank\tcount\n")
        for r, c in enumerate(hist.counts, start=1):
            fh.write(f"{r}\t{int(c)}\n")
