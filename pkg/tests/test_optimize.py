"""Simplex and quasi-Newton minimizers on standard test problems."""

import math

import numpy as np
import pytest

from bivemos.optimize import QUASI_NEWTON, SIMPLEX, OptimizerConfig, minimize


def rosenbrock(x):
    return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)


@pytest.mark.parametrize("method", [SIMPLEX, QUASI_NEWTON])
class TestBothMethods:
    def test_convex_quadratic(self, method):
        c = np.array([3.0, -2.0])
        res = minimize(lambda x: float(((x - c) ** 2).sum()), [0.0, 0.0],
                       OptimizerConfig(method=method, x_tol=1e-10, f_tol=1e-16))
        assert np.allclose(res.x_min, c, atol=1e-6)
        assert res.converged

    def test_f_min_is_objective_at_x_min(self, method):
        obj = lambda x: float((x**2).sum() + math.sin(x[0]))
        res = minimize(obj, [2.0, -1.0], OptimizerConfig(method=method))
        assert res.f_min == obj(res.x_min)

    def test_never_worse_than_start(self, method):
        obj = lambda x: float((x**4).sum() - x[0])
        x0 = np.array([0.7, -0.3])
        res = minimize(obj, x0, OptimizerConfig(method=method, max_evals=50))
        assert res.f_min <= obj(x0)
        assert res.evals <= 50

    def test_deterministic(self, method):
        obj = lambda x: rosenbrock(x)
        r1 = minimize(obj, [-1.2, 1.0], OptimizerConfig(method=method))
        r2 = minimize(obj, [-1.2, 1.0], OptimizerConfig(method=method))
        assert np.array_equal(r1.x_min, r2.x_min)
        assert r1.f_min == r2.f_min and r1.evals == r2.evals
        assert r1.converged == r2.converged

    def test_rejects_non_finite_start(self, method):
        with pytest.raises(ValueError):
            minimize(lambda x: float("inf"), [0.0], OptimizerConfig(method=method))

    def test_nan_treated_as_barrier(self, method):
        def obj(x):
            if x[0] > 1.0:
                return float("nan")
            return float((x**2).sum())

        res = minimize(obj, [0.5, 0.5],
                       OptimizerConfig(method=method, x_tol=1e-10, f_tol=1e-16))
        assert math.isfinite(res.f_min)
        assert np.allclose(res.x_min, 0.0, atol=1e-5)

    def test_halfspace_barrier(self, method):
        def obj(x):
            if x[0] < -0.5:
                return float("inf")
            return float(((x - np.array([-2.0, 0.0])) ** 2).sum())

        res = minimize(obj, [1.0, 0.4], OptimizerConfig(method=method))
        assert math.isfinite(res.f_min)
        assert res.x_min[0] >= -0.5
        assert res.x_min[0] == pytest.approx(-0.5, abs=1e-3)


class TestSimplex:
    def test_rosenbrock_within_400_evals(self):
        res = minimize(
            rosenbrock,
            [-1.2, 1.0],
            OptimizerConfig(method=SIMPLEX, max_evals=400, x_tol=1e-10, f_tol=1e-14),
        )
        assert res.f_min < 1e-8
        assert np.allclose(res.x_min, [1.0, 1.0], atol=1e-3)

    def test_monotone_best_so_far(self):
        best = [float("inf")]
        record = []

        def obj(x):
            v = rosenbrock(x)
            best[0] = min(best[0], v)
            record.append(best[0])
            return v

        minimize(obj, [-1.2, 1.0], OptimizerConfig(method=SIMPLEX))
        assert all(a >= b for a, b in zip(record, record[1:]))

    def test_respects_max_evals(self):
        calls = [0]

        def obj(x):
            calls[0] += 1
            return rosenbrock(x)

        res = minimize(obj, [-1.2, 1.0], OptimizerConfig(method=SIMPLEX, max_evals=37))
        assert calls[0] <= 37
        assert res.evals == calls[0]
        assert not res.converged

    def test_converged_flag_on_easy_problem(self):
        res = minimize(lambda x: float((x**2).sum()), [1.0, 1.0, 1.0],
                       OptimizerConfig(method=SIMPLEX))
        assert res.converged


class TestQuasiNewton:
    def test_rosenbrock(self):
        res = minimize(rosenbrock, [-1.2, 1.0], OptimizerConfig(method=QUASI_NEWTON))
        assert res.f_min < 1e-8
        assert np.allclose(res.x_min, [1.0, 1.0], atol=1e-4)

    def test_fewer_evals_than_simplex_in_high_dim(self):
        # the motivation for offering the quasi-Newton option
        dim = 12
        a = np.linspace(1.0, 4.0, dim)
        obj = lambda x: float((a * x**2).sum())
        x0 = np.ones(dim)
        nm = minimize(obj, x0, OptimizerConfig(method=SIMPLEX))
        qn = minimize(obj, x0, OptimizerConfig(method=QUASI_NEWTON))
        assert qn.f_min < 1e-6 and nm.f_min < 1e-6
        assert qn.evals < nm.evals


class TestConfig:
    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            OptimizerConfig(method="annealing")

    def test_bad_tolerances_rejected(self):
        with pytest.raises(ValueError):
            OptimizerConfig(x_tol=0.0)
        with pytest.raises(ValueError):
            OptimizerConfig(max_evals=0)
