"""Independent oracle implementations used to freeze expected values.

Everything here is coded from the definitions (math.erfc, direct matrix
algebra, quadrature, rejection sampling) without touching the package's
kernel paths, so tests compare two separately derived routes.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def phi(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def Phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_quantile_bisect(p: float, lo=-40.0, hi=40.0, tol=1e-13) -> float:
    """Bisection on the erfc-based CDF."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if Phi(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def tbn_density(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Dense evaluation of the truncated bivariate normal PDF from its
    printed definition, with an explicitly inverted scale matrix."""
    if x[0] < 0.0:
        return 0.0
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    inv = np.array([[sigma[1, 1], -sigma[0, 1]], [-sigma[1, 0], sigma[0, 0]]]) / det
    diff = np.asarray(x, float) - np.asarray(mu, float)
    quad = diff @ inv @ diff
    norm_const = det**-0.5 / (2.0 * math.pi * Phi(mu[0] / math.sqrt(sigma[0, 0])))
    return norm_const * math.exp(-0.5 * quad)


def tbn_log_density(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Log-space twin of tbn_density (no underflow for large quadratics)."""
    if x[0] < 0.0:
        return -math.inf
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    inv = np.array([[sigma[1, 1], -sigma[0, 1]], [-sigma[1, 0], sigma[0, 0]]]) / det
    diff = np.asarray(x, float) - np.asarray(mu, float)
    quad = diff @ inv @ diff
    return (
        -0.5 * quad
        - math.log(2.0 * math.pi)
        - 0.5 * math.log(det)
        - math.log(Phi(mu[0] / math.sqrt(sigma[0, 0])))
    )


def tbn_normalization_quadrature(mu, sigma, epsabs=1e-9) -> float:
    """2-D adaptive quadrature of the density over the spec's box."""
    mu = np.asarray(mu, float)
    sigma = np.asarray(sigma, float)
    sw = math.sqrt(sigma[0, 0])
    st = math.sqrt(sigma[1, 1])
    val, _ = integrate.dblquad(
        lambda t, w: tbn_density(np.array([w, t]), mu, sigma),
        0.0,
        mu[0] + 10.0 * sw,
        mu[1] - 10.0 * st,
        mu[1] + 10.0 * st,
        epsabs=epsabs,
    )
    return val


def tbn_rejection_sample(mu, sigma, n_accept: int, rng) -> np.ndarray:
    """Accepted draws from the parent normal with wind >= 0."""
    mu = np.asarray(mu, float)
    chol = np.linalg.cholesky(np.asarray(sigma, float))
    out = []
    have = 0
    while have < n_accept:
        z = rng.standard_normal((max(200000, n_accept), 2)) @ chol.T + mu
        z = z[z[:, 0] >= 0.0]
        out.append(z)
        have += len(z)
    return np.concatenate(out)[:n_accept]


def crps_mc_kernel(sample: np.ndarray, y: float) -> float:
    """CRPS kernel form E|X - y| - 0.5 E|X - X'| from an i.i.d. sample."""
    x = np.asarray(sample, float)
    half = len(x) // 2
    return float(
        np.abs(x - y).mean() - 0.5 * np.abs(x[:half] - x[half : 2 * half]).mean()
    )


def truncnorm_cdf(t, loc, scale):
    if t < 0.0:
        return 0.0
    p = Phi(loc / scale)
    return (Phi((t - loc) / scale) - Phi(-loc / scale)) / p


def crps_truncnorm_quadrature(loc, scale, y, upper_sigmas=14.0) -> float:
    """Quadrature of the integral definition over the real line (the CDF
    is zero below the support)."""
    upper = max(loc, 0.0) + upper_sigmas * scale

    def integrand(t):
        ind = 1.0 if t >= y else 0.0
        return (truncnorm_cdf(t, loc, scale) - ind) ** 2

    lo = min(0.0, y)
    val = 0.0
    # integrate piecewise so the kink at y does not degrade accuracy
    cuts = sorted({lo, 0.0, max(y, 0.0), upper})
    for a, b in zip(cuts, cuts[1:]):
        if b > a:
            part, _ = integrate.quad(integrand, a, b, epsabs=1e-10, limit=400)
            val += part
    return val


def crps_normal_quadrature(loc, scale, y) -> float:
    span = 14.0 * scale

    def integrand(t):
        ind = 1.0 if t >= y else 0.0
        return (Phi((t - loc) / scale) - ind) ** 2

    cuts = sorted({loc - span, y, loc + span})
    val = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b > a:
            part, _ = integrate.quad(integrand, a, b, epsabs=1e-10, limit=400)
            val += part
    return val


def grid_refine_spatial_median(points: np.ndarray, rounds=30) -> np.ndarray:
    """Brute-force grid refinement of the summed-distance objective."""
    pts = np.asarray(points, float)

    def objective(grid):
        # grid: (g, 2)
        return np.linalg.norm(grid[:, None, :] - pts[None, :, :], axis=2).sum(axis=1)

    lo = pts.min(axis=0) - 1.0
    hi = pts.max(axis=0) + 1.0
    for _ in range(rounds):
        gx = np.linspace(lo[0], hi[0], 21)
        gy = np.linspace(lo[1], hi[1], 21)
        gg = np.array([[x, y] for x in gx for y in gy])
        best = gg[int(np.argmin(objective(gg)))]
        span = (hi - lo) / 4.0
        lo = best - span / 2.0
        hi = best + span / 2.0
    return best
