"""Gaussian copula combination of two univariate predictive margins into a
bivariate law, with the latent correlation estimated from a separate
historical period.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .distributions import UnivariateLaw

__all__ = ["CopulaModel", "estimate_correlation", "copula_sample"]

_GAMMA_CLAMP = 0.999


@dataclass(frozen=True)
class CopulaModel:
    """Latent Gaussian correlation between the two coordinates."""

    gamma: float

    def __post_init__(self):
        if not -1.0 < self.gamma < 1.0:
            raise ValueError(f"correlation must lie in (-1, 1), got {self.gamma}")


def estimate_correlation(
    history: Sequence[tuple[tuple[UnivariateLaw, UnivariateLaw], np.ndarray]],
) -> CopulaModel:
    """Empirical correlation of the latent scores Phi^-1(F_margin(obs)).

    ``history`` pairs each observation vector with the margins fitted for
    its case.  Margin CDF values of exactly 0 or 1 are winsorized to
    [eps, 1-eps] with eps = 1/(2 * history size).
    """
    n = len(history)
    if n < 2:
        raise ValueError(f"correlation undefined for history of size {n}")
    eps = 1.0 / (2.0 * n)
    u = np.empty((n, 2))
    for i, ((law_w, law_t), obs) in enumerate(history):
        obs = np.asarray(obs, dtype=float)
        u[i, 0] = law_w.cdf(float(obs[0]))
        u[i, 1] = law_t.cdf(float(obs[1]))
    u = np.clip(u, eps, 1.0 - eps)
    z = ndtri(u)
    gamma = float(np.corrcoef(z[:, 0], z[:, 1])[0, 1])
    gamma = float(np.clip(gamma, -_GAMMA_CLAMP, _GAMMA_CLAMP))
    return CopulaModel(gamma=gamma)


def copula_sample(
    margins: tuple[UnivariateLaw, UnivariateLaw],
    model: CopulaModel,
    n: int,
    seed,
) -> np.ndarray:
    """Draw ``n`` vectors: latent correlated standard normal pairs mapped
    through Phi and then the margin quantile functions."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = model.gamma
    z1 = rng.standard_normal(n)
    z2 = g * z1 + np.sqrt(1.0 - g * g) * rng.standard_normal(n)
    u1 = _interior(ndtr(z1))
    u2 = _interior(ndtr(z2))
    law_w, law_t = margins
    return np.column_stack([law_w.quantile_array(u1), law_t.quantile_array(u2)])


def _interior(u: np.ndarray) -> np.ndarray:
    # Phi can round to 0/1 in double precision; quantiles need (0, 1)
    tiny = np.finfo(float).tiny
    return np.clip(u, tiny, 1.0 - 1e-16)
