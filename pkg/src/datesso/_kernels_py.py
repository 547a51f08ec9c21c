"""Reference numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
These versions are used when the compiled extension is unavailable and serve
as the cross-check for it in the test-suite.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import lfilter


def frac_filter(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Causal truncated filter ``y[t] = sum_k weights[k] * x[t-k]``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    if weights.size == 0:
        return np.zeros_like(x)
    return np.convolve(x, weights)[: x.size]


def frac_unfilter(y: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`frac_filter` for ``weights[0] == 1``."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    n = y.size
    k = weights.size
    rev = weights[1:][::-1].copy()
    x = np.empty(n, dtype=np.float64)
    for t in range(n):
        lags = min(t, k - 1)
        acc = y[t]
        if lags:
            acc -= rev[k - 1 - lags:] @ x[t - lags:t]
        x[t] = acc
    return x


def arma_residuals(y: np.ndarray, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Innovations ``e[t] = y[t] - sum phi_i y[t-i] - sum theta_j e[t-j]`` (zero pre-sample)."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        return y.copy()
    b = np.concatenate(([1.0], -np.asarray(phi, dtype=np.float64)))
    a = np.concatenate(([1.0], np.asarray(theta, dtype=np.float64)))
    return lfilter(b, a, y)


def evaluate_candidates(
    latency: np.ndarray,
    requests: np.ndarray,
    workloads: np.ndarray,
    cl: float,
    cu: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw latency, clamped utilization and feasibility for a candidate x step grid."""
    lat = np.asarray(latency, dtype=np.float64)[:, None]
    req = np.asarray(requests, dtype=np.float64)[:, None]
    w = np.asarray(workloads, dtype=np.float64)[None, :]
    work = lat * w
    raw = work / req
    util = np.clip(work / (cl * req), 0.0, 1.0)
    feasible = (raw <= cl) & (util >= cu)
    return raw, util, feasible


def window_scores(
    util: np.ndarray,
    lnorm: np.ndarray,
    upto: int,
    principal: np.ndarray,
    cu_global: float,
    cl_global_norm: float,
    include_debt: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row utility score over the first ``upto`` columns, plus its interest terms."""
    u = np.asarray(util, dtype=np.float64)[:, :upto]
    ln = np.asarray(lnorm, dtype=np.float64)[:, :upto]
    short = cu_global - u
    alpha = np.where(cu_global >= u, short, 0.0).sum(axis=1)
    excess = ln - cl_global_norm
    beta = np.where(ln >= cl_global_norm, excess, 0.0).sum(axis=1)
    score = u.sum(axis=1) - ln.sum(axis=1)
    if include_debt:
        score = score - (np.asarray(principal, dtype=np.float64) + alpha + beta)
    return score, alpha, beta
