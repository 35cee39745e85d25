"""Pure-NumPy implementations of the hot numerical kernels.

Used when the compiled extension is unavailable (or forced via
``BIVEMOS_BACKEND=python``).  Every function here has a byte-identical
signature in ``_core`` and the two are cross-checked in the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr, ndtr

_LOG_2PI = float(np.log(2.0 * np.pi))
_INV_SQRT_PI = float(1.0 / np.sqrt(np.pi))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


def _std_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def tbn_logpdf_arr(mu_w, mu_t, s_ww, s_wt, s_tt, y_w, y_t):
    """Elementwise log-density of the zero-truncated bivariate normal.

    Returns -inf where the wind coordinate is below the support and NaN
    where the scale matrix is not positive definite.
    """
    det = s_ww * s_tt - s_wt * s_wt
    valid = (s_ww > 0.0) & (s_tt > 0.0) & (det > 0.0)
    dw = y_w - mu_w
    dt = y_t - mu_t
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = (s_tt * dw * dw - 2.0 * s_wt * dw * dt + s_ww * dt * dt) / det
        out = (
            -_LOG_2PI
            - 0.5 * np.log(det)
            - 0.5 * quad
            - log_ndtr(mu_w / np.sqrt(np.where(valid, s_ww, 1.0)))
        )
    out = np.where(y_w < 0.0, -np.inf, out)
    return np.where(valid, out, np.nan)


def emos_mean_log_score(theta, group_sums, ens_cov, obs):
    """Mean negative log-density of the bivariate model on a training block.

    ``theta`` packs [a (2), B_1..B_m row-major (4m), scale factor (4),
    spread coefficient matrix (4)]; the scale intercept is factor @ factor.T.
    ``group_sums`` is (n, m, 2), ``ens_cov`` is (n, 3) as (ww, wt, tt),
    ``obs`` is (n, 2).  Returns +inf if any case yields an invalid scale
    matrix or zero density.
    """
    n, m, _ = group_sums.shape
    a = theta[:2]
    b = theta[2 : 2 + 4 * m].reshape(m, 2, 2)
    cf = theta[2 + 4 * m : 6 + 4 * m].reshape(2, 2)
    d = theta[6 + 4 * m : 10 + 4 * m].reshape(2, 2)

    mu = a + np.einsum("kij,nkj->ni", b, group_sums)
    c = cf @ cf.T
    s_ww = ens_cov[:, 0]
    s_wt = ens_cov[:, 1]
    s_tt = ens_cov[:, 2]
    t_ww = c[0, 0] + d[0, 0] ** 2 * s_ww + 2.0 * d[0, 0] * d[0, 1] * s_wt + d[0, 1] ** 2 * s_tt
    t_wt = (
        c[0, 1]
        + d[0, 0] * d[1, 0] * s_ww
        + (d[0, 0] * d[1, 1] + d[0, 1] * d[1, 0]) * s_wt
        + d[0, 1] * d[1, 1] * s_tt
    )
    t_tt = c[1, 1] + d[1, 0] ** 2 * s_ww + 2.0 * d[1, 0] * d[1, 1] * s_wt + d[1, 1] ** 2 * s_tt

    vals = tbn_logpdf_arr(mu[:, 0], mu[:, 1], t_ww, t_wt, t_tt, obs[:, 0], obs[:, 1])
    if np.isnan(vals).any() or np.isneginf(vals).any():
        return float("inf")
    return float(-vals.mean())


def crps_normal_arr(loc, scale, y):
    """Closed-form CRPS of the normal law, elementwise."""
    z = (y - loc) / scale
    return scale * (z * (2.0 * ndtr(z) - 1.0) + 2.0 * _std_pdf(z) - _INV_SQRT_PI)


def crps_truncnormal_arr(loc, scale, y):
    """Closed-form CRPS of the zero-truncated normal law, elementwise.

    Observations below zero are outside the support; the integral
    definition then adds |y| to the value at the boundary.
    """
    p = ndtr(loc / scale)
    yy = np.maximum(y, 0.0)
    z = (yy - loc) / scale
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (
            z * p * (2.0 * ndtr(z) + p - 2.0)
            + 2.0 * _std_pdf(z) * p
            - _INV_SQRT_PI * ndtr(np.sqrt(2.0) * loc / scale)
        )
        out = scale * val / (p * p)
    return out + np.maximum(-y, 0.0)


def univ_mean_crps(theta, group_sums, ens_var, obs, truncated):
    """Mean CRPS of a univariate spread-regression model on a training block.

    ``theta`` packs [intercept, m group coefficients, sc, sd]; the
    predictive variance is sc**2 + sd**2 * ens_var.  Returns +inf on any
    degenerate case.
    """
    m = group_sums.shape[1]
    loc = theta[0] + group_sums @ theta[1 : 1 + m]
    var = theta[1 + m] ** 2 + theta[2 + m] ** 2 * ens_var
    if not np.all(var > 0.0):
        return float("inf")
    scale = np.sqrt(var)
    if truncated:
        vals = crps_truncnormal_arr(loc, scale, obs)
    else:
        vals = crps_normal_arr(loc, scale, obs)
    if not np.all(np.isfinite(vals)):
        return float("inf")
    return float(vals.mean())


def energy_score_mc(xw, xt, yw, yt):
    """Monte Carlo energy score with the consecutive-pair spread term."""
    n = xw.shape[0]
    d1 = np.hypot(xw - yw, xt - yt).mean()
    d2 = np.hypot(np.diff(xw), np.diff(xt)).sum() / (2.0 * (n - 1))
    return float(d1 - d2)


def energy_score_ensemble(fw, ft, yw, yt):
    """Exact energy score of a finite ensemble (double-sum form)."""
    m = fw.shape[0]
    d1 = np.hypot(fw - yw, ft - yt).mean()
    dw = fw[:, None] - fw[None, :]
    dt = ft[:, None] - ft[None, :]
    d2 = np.hypot(dw, dt).sum() / (2.0 * m * m)
    return float(d1 - d2)


def preranks(uw, ut):
    """Componentwise weak-dominance counts (including self) for a pool."""
    le = (uw[:, None] <= uw[None, :]) & (ut[:, None] <= ut[None, :])
    return le.sum(axis=0).astype(np.int64)
