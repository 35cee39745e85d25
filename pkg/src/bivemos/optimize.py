"""Derivative-free simplex minimizer plus a finite-difference quasi-Newton
variant, used for mean-log-score and mean-CRPS minimization.

Objectives may return +inf (barrier regions) or NaN (treated as +inf);
neither crashes the search or enters the retained simplex as an incumbent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["SIMPLEX", "QUASI_NEWTON", "OptimizerConfig", "OptimResult", "minimize"]

SIMPLEX = "simplex"
QUASI_NEWTON = "quasi-newton"


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = SIMPLEX
    max_evals: int | None = None  # default 500 * dim
    x_tol: float = 1e-8
    f_tol: float = 1e-8
    simplex_init_step: float = 0.1

    def __post_init__(self):
        if self.method not in (SIMPLEX, QUASI_NEWTON):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_evals is not None and self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if not (self.x_tol > 0 and self.f_tol > 0 and self.simplex_init_step > 0):
            raise ValueError("tolerances and simplex_init_step must be positive")

    def resolved_max_evals(self, dim: int) -> int:
        return self.max_evals if self.max_evals is not None else 500 * dim


@dataclass(frozen=True)
class OptimResult:
    x_min: np.ndarray
    f_min: float
    evals: int
    converged: bool


class _BudgetExhausted(Exception):
    """Internal control flow: the evaluation budget ran out."""


class _Tracker:
    """Wraps the objective: counts evaluations, enforces the budget, maps
    NaN to +inf, keeps the best point ever seen."""

    def __init__(self, objective, max_evals: int):
        self._objective = objective
        self.max_evals = max_evals
        self.evals = 0
        self.best_x = None
        self.best_f = math.inf

    @property
    def exhausted(self) -> bool:
        return self.evals >= self.max_evals

    def __call__(self, x: np.ndarray) -> float:
        if self.exhausted:
            raise _BudgetExhausted
        self.evals += 1
        v = self._objective(x)
        v = float(v)
        if math.isnan(v):
            v = math.inf
        if v < self.best_f:
            self.best_f = v
            self.best_x = x.copy()
        return v


def minimize(objective, x0, cfg: OptimizerConfig | None = None) -> OptimResult:
    """Minimize ``objective`` from ``x0`` under ``cfg``.

    Raises ValueError when the objective is not finite at the start point.
    The returned ``f_min`` is always the objective value at ``x_min`` and
    never exceeds the value at ``x0``.
    """
    cfg = cfg or OptimizerConfig()
    x0 = np.asarray(x0, dtype=float).ravel().copy()
    if x0.size == 0:
        raise ValueError("x0 must be nonempty")
    tracker = _Tracker(objective, cfg.resolved_max_evals(x0.size))
    f0 = tracker(x0)
    if not math.isfinite(f0):
        raise ValueError(f"objective not finite at x0 (got {f0})")
    try:
        if cfg.method == SIMPLEX:
            converged = _simplex(tracker, x0, f0, cfg)
        else:
            converged = _quasi_newton(tracker, x0, f0, cfg)
    except _BudgetExhausted:
        converged = False
    return OptimResult(
        x_min=tracker.best_x,
        f_min=tracker.best_f,
        evals=tracker.evals,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Nelder-Mead simplex, standard coefficients (1, 2, 1/2, 1/2)

_REFLECT = 1.0
_EXPAND = 2.0
_CONTRACT = 0.5
_SHRINK = 0.5


def _simplex(f: _Tracker, x0: np.ndarray, f0: float, cfg: OptimizerConfig) -> bool:
    n = x0.size
    step = cfg.simplex_init_step
    verts = [x0]
    fvals = [f0]
    for i in range(n):
        v = x0.copy()
        v[i] += max(step * abs(x0[i]), step)
        verts.append(v)
        fvals.append(f(v))
    verts = np.asarray(verts)
    fvals = np.asarray(fvals)

    while True:
        order = np.argsort(fvals, kind="stable")
        verts = verts[order]
        fvals = fvals[order]

        if _simplex_converged(verts, fvals, cfg):
            return True

        centroid = verts[:-1].mean(axis=0)
        xr = centroid + _REFLECT * (centroid - verts[-1])
        fr = f(xr)

        if fr < fvals[0]:
            xe = centroid + _EXPAND * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                verts[-1], fvals[-1] = xe, fe
            else:
                verts[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            verts[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:  # outside contraction
                xc = centroid + _CONTRACT * (xr - centroid)
            else:  # inside contraction
                xc = centroid - _CONTRACT * (centroid - verts[-1])
            fc = f(xc)
            if fc < min(fr, fvals[-1]):
                verts[-1], fvals[-1] = xc, fc
            else:
                # shrink toward the best vertex
                for i in range(1, n + 1):
                    verts[i] = verts[0] + _SHRINK * (verts[i] - verts[0])
                    fvals[i] = f(verts[i])


def _simplex_converged(verts, fvals, cfg) -> bool:
    diameter = np.max(np.abs(verts[1:] - verts[0]))
    if diameter < cfg.x_tol:
        return True
    if math.isfinite(fvals[-1]) and (fvals[-1] - fvals[0]) < cfg.f_tol:
        return True
    return False


# ---------------------------------------------------------------------------
# BFGS with central finite-difference gradients and backtracking line search

_FD_STEP = 1e-6
_ARMIJO = 1e-4
_BACKTRACK = 0.5
_MAX_BACKTRACKS = 40


def _fd_gradient(f: _Tracker, x: np.ndarray, fx: float) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        h = _FD_STEP * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        fp = f(xp)
        fm = f(xm)
        if math.isfinite(fp) and math.isfinite(fm):
            g[i] = (fp - fm) / (2.0 * h)
        elif math.isfinite(fp):
            g[i] = (fp - fx) / h
        elif math.isfinite(fm):
            g[i] = (fx - fm) / h
        else:
            g[i] = 0.0
    return g


def _quasi_newton(f: _Tracker, x0: np.ndarray, f0: float, cfg: OptimizerConfig) -> bool:
    n = x0.size
    x, fx = x0, f0
    h_inv = np.eye(n)
    g = _fd_gradient(f, x, fx)

    while True:
        if np.max(np.abs(g)) <= 1e-8 * (1.0 + abs(fx)):
            return True
        p = -h_inv @ g
        if g @ p >= 0.0:  # not a descent direction; reset
            h_inv = np.eye(n)
            p = -g

        step, x_new, f_new = _backtrack(f, x, fx, g, p)
        if step == 0.0:
            if np.allclose(h_inv, np.eye(n)):
                # no descent at machine precision even along -g
                return True
            h_inv = np.eye(n)
            continue

        g_new = _fd_gradient(f, x_new, f_new)
        s = x_new - x
        yv = g_new - g
        sy = s @ yv
        if sy > 1e-12 * max(1.0, float(np.linalg.norm(s)) * float(np.linalg.norm(yv))):
            rho = 1.0 / sy
            eye = np.eye(n)
            left = eye - rho * np.outer(s, yv)
            h_inv = left @ h_inv @ left.T + rho * np.outer(s, s)

        f_drop = fx - f_new
        x_move = np.max(np.abs(s))
        x, fx, g = x_new, f_new, g_new
        if f_drop < cfg.f_tol * (1.0 + abs(fx)) and x_move < cfg.x_tol * (
            1.0 + np.max(np.abs(x))
        ):
            return True


def _backtrack(f: _Tracker, x, fx, g, p):
    slope = g @ p
    t = 1.0
    for _ in range(_MAX_BACKTRACKS):
        x_new = x + t * p
        f_new = f(x_new)
        if math.isfinite(f_new) and f_new <= fx + _ARMIJO * t * slope:
            return t, x_new, f_new
        t *= _BACKTRACK
    return 0.0, x, fx
