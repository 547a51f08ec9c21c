"""Backend selection for the hot kernels.

The compiled extension is preferred; if it was not built the numpy versions
are used. ``use_backend`` switches explicitly (tests and the benchmark use it).
"""
from __future__ import annotations

import logging
from types import ModuleType

from . import _kernels_py

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_NAMES = (
    "frac_filter",
    "frac_unfilter",
    "arma_residuals",
    "evaluate_candidates",
    "window_scores",
)

BACKEND = ""


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


def use_backend(name: str) -> None:
    """Bind the module-level kernel functions to ``name`` ("compiled" or "python")."""
    global BACKEND
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available in this install")
        module: ModuleType = _compiled
    elif name == "python":
        module = _kernels_py
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    for fn in _NAMES:
        globals()[fn] = getattr(module, fn)
    BACKEND = name
    log.debug("kernel backend: %s", name)


def frac_filter(x, weights):  # replaced by use_backend
    raise NotImplementedError


def frac_unfilter(y, weights):  # replaced by use_backend
    raise NotImplementedError


def arma_residuals(y, phi, theta):  # replaced by use_backend
    raise NotImplementedError


def evaluate_candidates(latency, requests, workloads, cl, cu):  # replaced by use_backend
    raise NotImplementedError


def window_scores(util, lnorm, upto, principal, cu_global, cl_global_norm, include_debt):  # replaced by use_backend
    raise NotImplementedError


use_backend("compiled" if _compiled is not None else "python")
