"""Bivariate wind/temperature EMOS on the zero-truncated bivariate normal,
with exchangeable member groups, plus the independent univariate models used
as margins and baselines.

Location is affine in the per-group member sums; the scale matrix is
C + D S D^T with S the ensemble covariance and C kept non-negative definite
through a square-root factor.  Training minimizes the mean log score
(bivariate) or the mean CRPS (univariate) over a pooled regional window.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .distributions import TruncBivariateNormal, UnivariateLaw
from .optimize import OptimizerConfig, OptimResult, minimize

__all__ = [
    "WIND",
    "TEMP",
    "GroupSpec",
    "ForecastCase",
    "BivariateEmosParams",
    "UnivariateEmosParams",
    "BivariateFit",
    "UnivariateFit",
    "ensemble_stats",
    "predictive_law",
    "mean_log_score",
    "fit_bivariate",
    "fit_univariate",
]

log = logging.getLogger(__name__)

WIND = "wind"
TEMP = "temp"
_COORD = {WIND: 0, TEMP: 1}

_INIT_SPREAD_COEF = 0.1  # fixed starting D = 0.1 * I; C factor starts at I


@dataclass(frozen=True)
class GroupSpec:
    """Partition of the M ensemble members into exchangeable groups."""

    group_sizes: tuple[int, ...]
    member_to_group: tuple[int, ...]

    def __post_init__(self):
        if len(self.group_sizes) < 1:
            raise ValueError("need at least one group")
        if any(s < 1 for s in self.group_sizes):
            raise ValueError(f"group sizes must be >= 1, got {self.group_sizes}")
        if sum(self.group_sizes) != len(self.member_to_group):
            raise ValueError("group sizes do not sum to the member count")
        counts = [0] * len(self.group_sizes)
        for g in self.member_to_group:
            if not 0 <= g < len(self.group_sizes):
                raise ValueError(f"member assigned to unknown group {g}")
            counts[g] += 1
        if tuple(counts) != self.group_sizes:
            raise ValueError("member assignment inconsistent with group sizes")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "GroupSpec":
        """Contiguous blocks: the first size_1 members form group 0, etc."""
        sizes = tuple(int(s) for s in sizes)
        assign = []
        for k, s in enumerate(sizes):
            assign.extend([k] * s)
        return cls(group_sizes=sizes, member_to_group=tuple(assign))

    @classmethod
    def distinguishable(cls, n_members: int) -> "GroupSpec":
        return cls.from_sizes([1] * n_members)

    @classmethod
    def from_text(cls, text: str) -> "GroupSpec":
        """Parse '1,10' (comma list of sizes) or '1x8' (size x group count,
        so '1x8' means eight singleton groups)."""
        text = text.strip()
        if "x" in text:
            size, _, count = text.partition("x")
            return cls.from_sizes([int(size)] * int(count))
        return cls.from_sizes(int(tok) for tok in text.split(","))

    @property
    def n_members(self) -> int:
        return len(self.member_to_group)

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    def indicator(self) -> np.ndarray:
        """(m, M) 0/1 matrix mapping members to their group sums."""
        ind = np.zeros((self.n_groups, self.n_members))
        ind[list(self.member_to_group), range(self.n_members)] = 1.0
        return ind

    def canonical_members(self, members: np.ndarray) -> np.ndarray:
        """Members regrouped into group blocks, sorted within each group.

        Exchangeable members carry no order, but float summation does;
        canonicalizing makes every statistic bitwise invariant under
        within-group permutations.
        """
        order: list[int] = []
        assign = np.asarray(self.member_to_group)
        for k in range(self.n_groups):
            idx = np.flatnonzero(assign == k)
            idx = idx[np.lexsort((members[idx, 1], members[idx, 0]))]
            order.extend(idx.tolist())
        return members[order]

    def group_sums(self, members: np.ndarray) -> np.ndarray:
        """(m, 2) per-group sums of member vectors."""
        return self.indicator() @ members


@dataclass(frozen=True)
class ForecastCase:
    """One (date, station) record: ensemble members plus the verifying
    observation (absent for pure prediction)."""

    date: dt.date
    station: str
    members: np.ndarray  # (M, 2), columns (wind m/s, temp K)
    observation: np.ndarray | None = None

    def __post_init__(self):
        members = np.asarray(self.members, dtype=float)
        if members.ndim != 2 or members.shape[1] != 2:
            raise ValueError(f"members must be (M, 2), got {members.shape}")
        if not np.all(np.isfinite(members)):
            raise ValueError(f"non-finite member values at {self.date}/{self.station}")
        if np.any(members[:, 0] < 0.0):
            raise ValueError(f"negative member wind speed at {self.date}/{self.station}")
        object.__setattr__(self, "members", members)
        if self.observation is not None:
            obs = np.asarray(self.observation, dtype=float)
            if obs.shape != (2,):
                raise ValueError(f"observation must be a 2-vector, got {obs.shape}")
            if not np.all(np.isfinite(obs)):
                raise ValueError(f"non-finite observation at {self.date}/{self.station}")
            if obs[0] < 0.0:
                raise ValueError(f"negative observed wind speed at {self.date}/{self.station}")
            object.__setattr__(self, "observation", obs)

    @property
    def n_members(self) -> int:
        return self.members.shape[0]


def ensemble_stats(case: ForecastCase) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean vector and covariance matrix (unbiased, divisor M-1)."""
    m = case.n_members
    if m < 2:
        raise ValueError("ensemble covariance needs at least 2 members")
    mean = case.members.mean(axis=0)
    diff = case.members - mean
    cov = diff.T @ diff / (m - 1)
    return mean, cov


def _case_stats(members: np.ndarray, groups: GroupSpec):
    """Group sums and ensemble covariance in canonical member order, so
    within-group permutations change nothing bitwise."""
    if members.shape[0] < 2:
        raise ValueError("ensemble covariance needs at least 2 members")
    canon = groups.canonical_members(members)
    bounds = np.cumsum([0, *groups.group_sizes])[:-1]
    gs = np.add.reduceat(canon, bounds, axis=0)
    mean = canon.mean(axis=0)
    diff = canon - mean
    cov = diff.T @ diff / (canon.shape[0] - 1)
    return gs, cov


@dataclass(frozen=True)
class BivariateEmosParams:
    """Parameters of the bivariate model: location intercept ``a``, one
    coefficient matrix per group in ``b``, scale intercept square-root
    factor ``c_factor`` (C = c_factor @ c_factor.T) and spread coefficient
    matrix ``d``."""

    a: np.ndarray  # (2,)
    b: tuple[np.ndarray, ...]  # m matrices (2, 2)
    c_factor: np.ndarray  # (2, 2)
    d: np.ndarray  # (2, 2)

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(2))
        object.__setattr__(
            self, "b", tuple(np.asarray(bk, dtype=float).reshape(2, 2) for bk in self.b)
        )
        object.__setattr__(self, "c_factor", np.asarray(self.c_factor, dtype=float).reshape(2, 2))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float).reshape(2, 2))

    @property
    def n_groups(self) -> int:
        return len(self.b)

    @staticmethod
    def n_free(n_groups: int) -> int:
        """Free parameter count: 2 (a) + 4 per group + 4 (c_factor) + 4 (d)."""
        return 4 * n_groups + 10

    @property
    def scale_intercept(self) -> np.ndarray:
        return self.c_factor @ self.c_factor.T

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.a]
            + [bk.ravel() for bk in self.b]
            + [self.c_factor.ravel(), self.d.ravel()]
        )

    @classmethod
    def from_vector(cls, vec: np.ndarray, n_groups: int) -> "BivariateEmosParams":
        vec = np.asarray(vec, dtype=float).ravel()
        expect = cls.n_free(n_groups)
        if vec.size != expect:
            raise ValueError(f"expected {expect} parameters for {n_groups} groups, got {vec.size}")
        m = n_groups
        return cls(
            a=vec[:2],
            b=tuple(vec[2 + 4 * k : 6 + 4 * k].reshape(2, 2) for k in range(m)),
            c_factor=vec[2 + 4 * m : 6 + 4 * m].reshape(2, 2),
            d=vec[6 + 4 * m : 10 + 4 * m].reshape(2, 2),
        )


def predictive_law(
    params: BivariateEmosParams, case: ForecastCase, groups: GroupSpec
) -> TruncBivariateNormal:
    """Per-case predictive law: location a + sum_k B_k (group-k sum), scale
    C + D S D^T.  Raises InvalidScaleError when the scale matrix is not
    positive definite (scorers treat that as +inf)."""
    if groups.n_members != case.n_members:
        raise ValueError(
            f"case has {case.n_members} members but the group spec expects {groups.n_members}"
        )
    if params.n_groups != groups.n_groups:
        raise ValueError(
            f"params cover {params.n_groups} groups but the spec has {groups.n_groups}"
        )
    gs, s = _case_stats(case.members, groups)
    mu = params.a + sum(bk @ gs[k] for k, bk in enumerate(params.b))
    sigma = params.scale_intercept + params.d @ s @ params.d.T
    return TruncBivariateNormal(
        mu_w=float(mu[0]),
        mu_t=float(mu[1]),
        sigma2_w=float(sigma[0, 0]),
        sigma2_t=float(sigma[1, 1]),
        sigma_wt=float(sigma[0, 1]),
    )


# ---------------------------------------------------------------------------
# training-block arrays shared by the objectives

@dataclass(frozen=True)
class _TrainingArrays:
    group_sums: np.ndarray  # (N, m, 2)
    ens_cov: np.ndarray  # (N, 3): ww, wt, tt
    obs: np.ndarray  # (N, 2)

    @property
    def n_cases(self) -> int:
        return self.obs.shape[0]


def _prepare_training(cases: Sequence[ForecastCase], groups: GroupSpec) -> _TrainingArrays:
    if not cases:
        raise ValueError("training set is empty")
    gs = np.empty((len(cases), groups.n_groups, 2))
    cov = np.empty((len(cases), 3))
    obs = np.empty((len(cases), 2))
    for i, case in enumerate(cases):
        if case.observation is None:
            raise ValueError(f"training case {case.date}/{case.station} has no observation")
        if case.n_members != groups.n_members:
            raise ValueError(
                f"case {case.date}/{case.station} has {case.n_members} members, "
                f"expected {groups.n_members}"
            )
        gs[i], s = _case_stats(case.members, groups)
        cov[i] = (s[0, 0], s[0, 1], s[1, 1])
        obs[i] = case.observation
    return _TrainingArrays(
        group_sums=np.ascontiguousarray(gs),
        ens_cov=np.ascontiguousarray(cov),
        obs=np.ascontiguousarray(obs),
    )


def mean_log_score(
    params: BivariateEmosParams,
    training: Sequence[ForecastCase],
    groups: GroupSpec,
) -> float:
    """Mean negative log predictive density over the training cases; +inf
    when any case yields an invalid scale matrix or zero density."""
    ta = _prepare_training(training, groups)
    theta = np.ascontiguousarray(params.to_vector())
    return float(_kernels.emos_mean_log_score(theta, ta.group_sums, ta.ens_cov, ta.obs))


def _regression_location_init(ta: _TrainingArrays, groups: GroupSpec):
    """Coordinate-wise OLS of the observations on the group sums; falls
    back to climatology + equal member weights when rank deficient."""
    n, m, _ = ta.group_sums.shape
    x = np.column_stack([np.ones(n), ta.group_sums.reshape(n, 2 * m)])
    coef, _, rank, _ = np.linalg.lstsq(x, ta.obs, rcond=None)
    if rank < x.shape[1]:
        n_members = groups.n_members
        ens_mean = ta.group_sums.sum(axis=1) / n_members
        a = ta.obs.mean(axis=0) - ens_mean.mean(axis=0)
        b = [np.eye(2) / n_members for _ in range(m)]
        log.warning(
            "rank-deficient regression design (rank %d < %d); "
            "falling back to climatological intercept with equal member weights",
            rank,
            x.shape[1],
        )
        return a, b
    # coef rows: intercept, then (gs_k wind, gs_k temp) pairs; columns (wind, temp)
    a = coef[0]
    b = [coef[1 + 2 * k : 3 + 2 * k].T for k in range(m)]
    return a, b


@dataclass(frozen=True)
class BivariateFit:
    params: BivariateEmosParams
    result: OptimResult
    init_score: float


def fit_bivariate(
    training: Sequence[ForecastCase],
    groups: GroupSpec,
    cfg: OptimizerConfig | None = None,
    scale_init: tuple[np.ndarray, np.ndarray] | None = None,
) -> BivariateFit:
    """Fit the bivariate model by minimizing the mean log score.

    Location parameters start at the regression coefficients, the scale
    parameters at fixed values (or at ``scale_init``, e.g. the previous
    day's estimates).  Refuses to fit when the window holds fewer cases
    than free parameters.
    """
    m = groups.n_groups
    n_free = BivariateEmosParams.n_free(m)
    if len(training) < n_free:
        raise ValueError(
            f"window holds {len(training)} cases but the model has {n_free} "
            f"free parameters; enlarge the training period or pool more stations"
        )
    ta = _prepare_training(training, groups)
    a0, b0 = _regression_location_init(ta, groups)
    if scale_init is not None:
        cf0, d0 = (np.asarray(v, dtype=float).reshape(2, 2) for v in scale_init)
    else:
        cf0, d0 = np.eye(2), _INIT_SPREAD_COEF * np.eye(2)
    init = BivariateEmosParams(a=a0, b=tuple(b0), c_factor=cf0, d=d0)
    theta0 = init.to_vector()

    def objective(theta: np.ndarray) -> float:
        return _kernels.emos_mean_log_score(
            np.ascontiguousarray(theta), ta.group_sums, ta.ens_cov, ta.obs
        )

    init_score = objective(theta0)
    res = minimize(objective, theta0, cfg)
    if not res.converged:
        log.warning(
            "bivariate fit did not converge after %d evaluations (score %.6f)",
            res.evals,
            res.f_min,
        )
    return BivariateFit(
        params=BivariateEmosParams.from_vector(res.x_min, m),
        result=res,
        init_score=float(init_score),
    )


# ---------------------------------------------------------------------------
# univariate margins

@dataclass(frozen=True)
class UnivariateEmosParams:
    """Univariate spread-regression model for one coordinate: location
    intercept + per-group coefficients, variance var_c + var_d * s^2."""

    variable: str  # WIND or TEMP
    intercept: float
    member_coeffs: tuple[float, ...]
    var_c: float
    var_d: float

    def __post_init__(self):
        if self.variable not in (WIND, TEMP):
            raise ValueError(f"unknown variable {self.variable!r}")
        if self.var_c < 0 or self.var_d < 0:
            raise ValueError("variance coefficients must be non-negative")

    def law_for(self, case: ForecastCase, groups: GroupSpec) -> UnivariateLaw:
        c = _COORD[self.variable]
        gs, s = _case_stats(case.members, groups)
        loc = self.intercept + float(np.dot(self.member_coeffs, gs[:, c]))
        var = self.var_c + self.var_d * float(s[c, c])
        if not var > 0.0:
            raise ValueError("degenerate predictive variance")
        scale = math.sqrt(var)
        if self.variable == WIND:
            return UnivariateLaw.zero_truncated(loc, scale)
        return UnivariateLaw.normal(loc, scale)


@dataclass(frozen=True)
class UnivariateFit:
    params: UnivariateEmosParams
    result: OptimResult
    init_score: float


def _univ_training(ta: _TrainingArrays, coord: int):
    gs = np.ascontiguousarray(ta.group_sums[:, :, coord])
    idx = 0 if coord == 0 else 2
    ens_var = np.ascontiguousarray(ta.ens_cov[:, idx])
    obs = np.ascontiguousarray(ta.obs[:, coord])
    return gs, ens_var, obs


def fit_univariate(
    training: Sequence[ForecastCase],
    variable: str,
    groups: GroupSpec,
    cfg: OptimizerConfig | None = None,
    nonnegative_coeffs: bool = False,
) -> UnivariateFit:
    """Fit a univariate margin by minimizing the mean CRPS (closed form for
    both the normal and the zero-truncated normal law).

    ``nonnegative_coeffs=True`` constrains member coefficients to be
    non-negative through a squared re-parameterization.
    """
    if variable not in _COORD:
        raise ValueError(f"variable must be '{WIND}' or '{TEMP}', got {variable!r}")
    m = groups.n_groups
    n_free = m + 3
    if len(training) < n_free:
        raise ValueError(
            f"window holds {len(training)} cases but the univariate model has "
            f"{n_free} free parameters"
        )
    ta = _prepare_training(training, groups)
    coord = _COORD[variable]
    gs, ens_var, obs = _univ_training(ta, coord)
    truncated = variable == WIND

    x = np.column_stack([np.ones(len(obs)), gs])
    coef, _, rank, _ = np.linalg.lstsq(x, obs, rcond=None)
    if rank < x.shape[1]:
        coef = np.zeros(x.shape[1])
        coef[0] = obs.mean() - gs.sum(axis=1).mean() / groups.n_members
        coef[1:] = 1.0 / groups.n_members
    resid = obs - x @ coef
    var0 = max(float(resid.var()), 1e-4)

    if nonnegative_coeffs:
        coeffs0 = np.sqrt(np.maximum(coef[1:], 1e-4))
    else:
        coeffs0 = coef[1:]
    theta0 = np.concatenate([[coef[0]], coeffs0, [math.sqrt(var0), _INIT_SPREAD_COEF]])

    def to_kernel_theta(theta: np.ndarray) -> np.ndarray:
        if not nonnegative_coeffs:
            return np.ascontiguousarray(theta)
        out = theta.copy()
        out[1 : 1 + m] = out[1 : 1 + m] ** 2
        return np.ascontiguousarray(out)

    def objective(theta: np.ndarray) -> float:
        return _kernels.univ_mean_crps(to_kernel_theta(theta), gs, ens_var, obs, truncated)

    init_score = objective(theta0)
    res = minimize(objective, theta0, cfg)
    theta = to_kernel_theta(res.x_min)
    params = UnivariateEmosParams(
        variable=variable,
        intercept=float(theta[0]),
        member_coeffs=tuple(float(v) for v in theta[1 : 1 + m]),
        var_c=float(theta[1 + m] ** 2),
        var_d=float(theta[2 + m] ** 2),
    )
    return UnivariateFit(params=params, result=res, init_score=float(init_score))
