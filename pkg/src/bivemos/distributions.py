"""Probability laws used by the calibration models.

Standard normal helpers, the bivariate normal law with the wind (first)
coordinate truncated below at zero (density, moments, sampler), and the
univariate normal / zero-truncated normal laws with closed-form CRPS for
the marginal models.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from . import _kernels

__all__ = [
    "InvalidScaleError",
    "MomentPair",
    "TruncBivariateNormal",
    "UnivariateLaw",
    "crps_normal",
    "crps_truncnormal",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "tbn_logpdf",
    "tbn_moments",
    "tbn_sample",
    "univ_cdf",
    "univ_quantile",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# below this much mass above zero, rejection sampling is replaced by the
# inverse-CDF conditional scheme
_REJECTION_MIN_ACCEPT = 0.05


class InvalidScaleError(ValueError):
    """Scale matrix is not symmetric positive definite."""


def std_normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / _SQRT_2PI


def std_normal_cdf(z: float) -> float:
    return float(ndtr(z))


def std_normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile requires 0 < p < 1, got {p}")
    return float(ndtri(p))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class TruncBivariateNormal:
    """Bivariate normal with the wind coordinate truncated below at zero.

    ``(mu_w, mu_t)`` is the location vector and ``[[sigma2_w, sigma_wt],
    [sigma_wt, sigma2_t]]`` the scale matrix of the parent normal; these
    are *not* the mean and covariance of the truncated law (see
    :func:`tbn_moments`).
    """

    mu_w: float
    mu_t: float
    sigma2_w: float
    sigma2_t: float
    sigma_wt: float

    def __post_init__(self):
        if not (self.sigma2_w > 0.0 and self.sigma2_t > 0.0):
            raise InvalidScaleError(
                f"diagonal scale entries must be positive, got "
                f"({self.sigma2_w}, {self.sigma2_t})"
            )
        if not self.det > 0.0:
            raise InvalidScaleError(f"scale matrix is singular or indefinite (det={self.det})")

    @property
    def det(self) -> float:
        return self.sigma2_w * self.sigma2_t - self.sigma_wt**2

    @property
    def sigma_w(self) -> float:
        return math.sqrt(self.sigma2_w)

    @property
    def sigma_t(self) -> float:
        return math.sqrt(self.sigma2_t)

    @property
    def location(self) -> np.ndarray:
        return np.array([self.mu_w, self.mu_t])

    @property
    def scale_matrix(self) -> np.ndarray:
        return np.array([[self.sigma2_w, self.sigma_wt], [self.sigma_wt, self.sigma2_t]])

    def logpdf(self, x) -> float:
        return tbn_logpdf(self, x)

    def moments(self) -> "MomentPair":
        return tbn_moments(self)

    def sample(self, n: int, seed) -> np.ndarray:
        return tbn_sample(self, n, seed)


@dataclass(frozen=True)
class MomentPair:
    """Mean vector and covariance matrix of a truncated law."""

    kappa: np.ndarray
    xi: np.ndarray


def tbn_logpdf(law: TruncBivariateNormal, x) -> float:
    """Log-density of the truncated law at a 2-vector.

    Zero density below the wind support comes back as -inf.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError(f"x must be a 2-vector, got shape {x.shape}")
    val = _kernels.tbn_logpdf_arr(
        np.array([law.mu_w], dtype=float),
        np.array([law.mu_t], dtype=float),
        np.array([law.sigma2_w], dtype=float),
        np.array([law.sigma_wt], dtype=float),
        np.array([law.sigma2_t], dtype=float),
        np.array([x[0]], dtype=float),
        np.array([x[1]], dtype=float),
    )[0]
    return float(val)


def _hazard(r: float) -> float:
    """phi(r) / Phi(r), evaluated in log space for deep truncation."""
    return math.exp(-0.5 * r * r - math.log(_SQRT_2PI) - float(log_ndtr(r)))


def tbn_moments(law: TruncBivariateNormal) -> MomentPair:
    """Mean vector and covariance matrix of the truncated law."""
    sw = law.sigma_w
    r = law.mu_w / sw
    h = _hazard(r)
    kappa = law.location + h * np.array([sw, law.sigma_wt / sw])
    corr = h * (r + h)
    base = np.array(
        [
            [law.sigma2_w, law.sigma_wt],
            [law.sigma_wt, law.sigma_wt**2 / law.sigma2_w],
        ]
    )
    xi = law.scale_matrix - corr * base
    return MomentPair(kappa=kappa, xi=xi)


def tbn_sample(law: TruncBivariateNormal, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. vectors from the truncated law.

    Rejection from the parent normal when the acceptance probability is
    workable; otherwise the wind coordinate is drawn by inverse CDF from
    its one-sided truncated marginal and the temperature coordinate from
    the conditional normal.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = _as_rng(seed)
    accept = float(ndtr(law.mu_w / law.sigma_w))
    if accept >= _REJECTION_MIN_ACCEPT:
        return _sample_rejection(law, n, rng, accept)
    return _sample_conditional(law, n, rng)


def _sample_rejection(law, n, rng, accept) -> np.ndarray:
    chol = np.linalg.cholesky(law.scale_matrix)
    loc = law.location
    out = np.empty((n, 2))
    have = 0
    while have < n:
        todo = n - have
        m = int(todo / accept * 1.2) + 16
        z = rng.standard_normal((m, 2)) @ chol.T + loc
        z = z[z[:, 0] >= 0.0]
        take = min(len(z), todo)
        out[have : have + take] = z[:take]
        have += take
    return out


def _sample_conditional(law, n, rng) -> np.ndarray:
    sw = law.sigma_w
    r = law.mu_w / sw
    p_above = float(ndtr(r))
    # V in (0, 1]: V=1 maps to the truncation boundary
    v = 1.0 - rng.random(n)
    zw = -ndtri(p_above * v)
    w = law.mu_w + sw * zw
    beta = law.sigma_wt / law.sigma2_w
    cond_var = law.sigma2_t - law.sigma_wt**2 / law.sigma2_w
    t = law.mu_t + beta * (w - law.mu_w) + math.sqrt(cond_var) * rng.standard_normal(n)
    return np.column_stack([np.maximum(w, 0.0), t])


def crps_normal(location: float, scale: float, y: float) -> float:
    """Closed-form CRPS of the normal law at observation ``y``."""
    if not scale > 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    return float(
        _kernels.crps_normal_arr(
            np.array([location], dtype=float),
            np.array([scale], dtype=float),
            np.array([y], dtype=float),
        )[0]
    )


def crps_truncnormal(location: float, scale: float, y: float) -> float:
    """Closed-form CRPS of the zero-truncated normal law at ``y``.

    ``y < 0`` lies outside the support; the score is still defined (the
    CDF integral picks up |y|) and a warning is emitted.
    """
    if not scale > 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    if y < 0.0:
        warnings.warn(
            f"observation {y} below the support of the zero-truncated law",
            stacklevel=2,
        )
    return float(
        _kernels.crps_truncnormal_arr(
            np.array([location], dtype=float),
            np.array([scale], dtype=float),
            np.array([y], dtype=float),
        )[0]
    )


NORMAL = "normal"
ZERO_TRUNCATED_NORMAL = "zero-truncated-normal"


@dataclass(frozen=True)
class UnivariateLaw:
    """Normal or zero-truncated normal law for one weather coordinate."""

    kind: str
    location: float
    scale: float

    def __post_init__(self):
        if self.kind not in (NORMAL, ZERO_TRUNCATED_NORMAL):
            raise ValueError(f"unknown law kind {self.kind!r}")
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @classmethod
    def normal(cls, location: float, scale: float) -> "UnivariateLaw":
        return cls(NORMAL, location, scale)

    @classmethod
    def zero_truncated(cls, location: float, scale: float) -> "UnivariateLaw":
        return cls(ZERO_TRUNCATED_NORMAL, location, scale)

    @property
    def truncated(self) -> bool:
        return self.kind == ZERO_TRUNCATED_NORMAL

    def cdf(self, x: float) -> float:
        return univ_cdf(self, x)

    def quantile(self, p: float) -> float:
        return univ_quantile(self, p)

    def logpdf(self, x: float) -> float:
        z = (x - self.location) / self.scale
        base = -0.5 * z * z - math.log(self.scale * _SQRT_2PI)
        if not self.truncated:
            return base
        if x < 0.0:
            return -math.inf
        return base - float(log_ndtr(self.location / self.scale))

    def mean(self) -> float:
        if not self.truncated:
            return self.location
        r = self.location / self.scale
        return self.location + self.scale * _hazard(r)

    def var(self) -> float:
        if not self.truncated:
            return self.scale**2
        r = self.location / self.scale
        h = _hazard(r)
        return self.scale**2 * (1.0 - h * (r + h))

    def crps(self, y: float) -> float:
        if self.truncated:
            return crps_truncnormal(self.location, self.scale, y)
        return crps_normal(self.location, self.scale, y)

    def sample(self, n: int, seed) -> np.ndarray:
        rng = _as_rng(seed)
        if not self.truncated:
            return self.location + self.scale * rng.standard_normal(n)
        u = 1.0 - rng.random(n)  # (0, 1]
        return self.quantile_array(u)

    def quantile_array(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if not self.truncated:
            return self.location + self.scale * ndtri(p)
        p_above = float(ndtr(self.location / self.scale))
        z = -ndtri((1.0 - p) * p_above)
        return np.maximum(self.location + self.scale * z, 0.0)


def univ_cdf(law: UnivariateLaw, x: float) -> float:
    if not law.truncated:
        return float(ndtr((x - law.location) / law.scale))
    if x < 0.0:
        return 0.0
    # complementary form keeps precision under deep truncation
    p_above = float(ndtr(law.location / law.scale))
    upper = float(ndtr(-(x - law.location) / law.scale))
    return 1.0 - upper / p_above


def univ_quantile(law: UnivariateLaw, p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile requires 0 < p < 1, got {p}")
    return float(law.quantile_array(np.array([p]))[0])
