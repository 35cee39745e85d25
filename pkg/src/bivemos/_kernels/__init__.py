"""Hot numerical kernels: compiled core with a pure-NumPy fallback.

The compiled extension (``bivemos._kernels._core``) is used when it was
built; otherwise the NumPy reference implementation takes over.  Set
``BIVEMOS_BACKEND=python`` to force the fallback or ``BIVEMOS_BACKEND=c``
to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os

from . import reference

_KERNEL_NAMES = (
    "tbn_logpdf_arr",
    "emos_mean_log_score",
    "crps_normal_arr",
    "crps_truncnormal_arr",
    "univ_mean_crps",
    "energy_score_mc",
    "energy_score_ensemble",
    "preranks",
)


def _load():
    choice = os.environ.get("BIVEMOS_BACKEND", "").strip().lower()
    if choice in ("python", "reference", "pure"):
        return reference, "python"
    try:
        from . import _core
    except ImportError:
        if choice in ("c", "compiled", "cython"):
            raise ImportError(
                "BIVEMOS_BACKEND=%s requested but the compiled kernel core "
                "is not built; run `pip install -e .` or `python setup.py "
                "build_ext --inplace`" % choice
            ) from None
        return reference, "python"
    return _core, "c"


_impl, BACKEND = _load()


def get_backend(name: str):
    """Return a kernel module by name ('c' or 'python'); for benchmarks."""
    if name == "python":
        return reference
    if name == "c":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> tuple[str, ...]:
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return ("python",)
    return ("c", "python")


tbn_logpdf_arr = _impl.tbn_logpdf_arr
emos_mean_log_score = _impl.emos_mean_log_score
crps_normal_arr = _impl.crps_normal_arr
crps_truncnormal_arr = _impl.crps_truncnormal_arr
univ_mean_crps = _impl.univ_mean_crps
energy_score_mc = _impl.energy_score_mc
energy_score_ensemble = _impl.energy_score_ensemble
preranks = _impl.preranks

__all__ = ["BACKEND", "available_backends", "get_backend", *_KERNEL_NAMES]
