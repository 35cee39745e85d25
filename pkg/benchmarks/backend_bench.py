#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Times each kernel on workloads shaped like the real fitting and scoring
paths (training-window objectives, 10000-sample energy scores, 101-point
pre-ranks), then an end-to-end window fit under each backend.

Usage: python3 benchmarks/backend_bench.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from bivemos import _kernels


def _timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _objective_inputs(n_cases, m, seed=0):
    rng = np.random.default_rng(seed)
    gs = np.abs(rng.normal(5.0, 1.0, (n_cases, m, 2)))
    cov = np.empty((n_cases, 3))
    cov[:, 0] = rng.uniform(0.2, 2.0, n_cases)
    cov[:, 2] = rng.uniform(0.2, 2.0, n_cases)
    cov[:, 1] = rng.uniform(-0.3, 0.3, n_cases) * np.sqrt(cov[:, 0] * cov[:, 2])
    obs = np.column_stack(
        [np.abs(rng.normal(5.0, 1.5, n_cases)), rng.normal(283.0, 2.0, n_cases)]
    )
    theta = np.concatenate(
        [[0.3, 0.5], (np.eye(2).ravel().tolist() * m), np.eye(2).ravel(), 0.1 * np.eye(2).ravel()]
    )
    theta[2 : 2 + 4 * m] /= m
    return theta, gs, cov, obs


def kernel_benchmarks(repeats):
    rng = np.random.default_rng(1)
    cases = []

    theta, gs, cov, obs = _objective_inputs(400, 2)
    cases.append(
        ("emos objective (400 cases, 2 groups)",
         lambda k: k.emos_mean_log_score(theta, gs, cov, obs))
    )
    theta8, gs8, cov8, obs8 = _objective_inputs(3354, 8)
    cases.append(
        ("emos objective (3354 cases, 8 groups)",
         lambda k: k.emos_mean_log_score(theta8, gs8, cov8, obs8))
    )
    loc = rng.normal(5.0, 2.0, 400)
    scale = rng.uniform(0.5, 2.0, 400)
    y = np.abs(rng.normal(5.0, 2.0, 400))
    ut = np.array([0.3, 0.25, 0.25, 1.0, 0.2])
    ugs = np.abs(rng.normal(5.0, 1.0, (400, 2)))
    uvar = rng.uniform(0.1, 2.0, 400)
    cases.append(
        ("univariate CRPS objective (400 cases)",
         lambda k: k.univ_mean_crps(ut, ugs, uvar, y, True))
    )
    cases.append(
        ("truncated-normal CRPS array (400)",
         lambda k: k.crps_truncnormal_arr(loc, scale, y))
    )
    xw = rng.normal(size=10000)
    xt = rng.normal(size=10000)
    cases.append(
        ("energy score MC (n=10000)", lambda k: k.energy_score_mc(xw, xt, 0.3, -0.2))
    )
    fw, ft = xw[:51], xt[:51]
    cases.append(
        ("energy score ensemble (M=51)",
         lambda k: k.energy_score_ensemble(fw, ft, 0.3, -0.2))
    )
    uw = rng.normal(size=101)
    utt = rng.normal(size=101)
    cases.append(("pre-ranks (101 pooled points)", lambda k: k.preranks(uw, utt)))
    return cases


def fit_benchmark():
    """One 400-case window fit of the 18-parameter model per backend."""
    from bivemos.optimize import OptimizerConfig
    from bivemos.pipeline import build_window_plan, synthesize_dataset
    from bivemos.emos import fit_bivariate
    from bivemos.synthetic import SyntheticSpec

    spec = SyntheticSpec(n_stations=10, n_days=41, group_sizes=(1, 10))
    ds = synthesize_dataset(spec, 3)
    plan = build_window_plan(ds, 40)
    date = plan.verification_dates[0]
    window = set(plan.training_dates(date))
    training = [c for c in ds.cases if c.date in window and c.observation is not None]
    cfg = OptimizerConfig(max_evals=20000, x_tol=1e-6, f_tol=1e-7)

    results = {}
    saved = {name: getattr(_kernels, name) for name in _kernels._KERNEL_NAMES}
    try:
        for backend in _kernels.available_backends():
            impl = _kernels.get_backend(backend)
            for name in _kernels._KERNEL_NAMES:
                setattr(_kernels, name, getattr(impl, name))
            t0 = time.perf_counter()
            fit = fit_bivariate(training, ds.groups, cfg)
            results[backend] = (time.perf_counter() - t0, fit.result.evals)
    finally:
        for name, fn in saved.items():
            setattr(_kernels, name, fn)
    return len(training), results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    print(f"available backends: {', '.join(backends)} (active: {_kernels.BACKEND})")
    if "c" not in backends:
        print("compiled core not built; showing the NumPy fallback only")

    print(f"\n{'kernel':44s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for label, fn in kernel_benchmarks(args.repeats):
        times = {}
        for b in backends:
            impl = _kernels.get_backend(b)
            times[b] = _timeit(lambda: fn(impl), args.repeats)
        row = f"{label:44s}"
        for b in backends:
            row += f"{times[b] * 1e6:>10.1f}us"
        if "c" in times and "python" in times:
            row += f"{times['python'] / times['c']:>9.1f}x"
        print(row)

    n_cases, results = fit_benchmark()
    print(f"\nend-to-end window fit (18 parameters, {n_cases} cases):")
    for backend, (secs, evals) in results.items():
        print(f"  {backend:8s} {secs:8.3f} s  ({evals} objective evaluations)")
    if "c" in results and "python" in results:
        print(f"  speedup {results['python'][0] / results['c'][0]:.1f}x")


if __name__ == "__main__":
    main()
