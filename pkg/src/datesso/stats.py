"""Comparison statistics: sustainability score, Kruskal-Wallis H and eta squared."""
from __future__ import annotations

import warnings
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2, rankdata


class DegenerateComparison(ValueError):
    pass


class SmallSampleWarning(UserWarning):
    pass


def sustainability_score(inputs: Mapping[str, tuple[float, int]]) -> dict[str, float | None]:
    """Normalized total utility per violation, in [1/V, 2/V].

    ``inputs`` maps strategy name to ``(S_total, V)``. Strategies with V == 0
    get ``None`` (no violations to normalize by).
    """
    if len(inputs) < 2:
        raise ValueError("need at least two strategies to compare")
    totals = [s for s, _ in inputs.values()]
    s_min, s_max = min(totals), max(totals)
    if s_max == s_min:
        raise DegenerateComparison("degenerate comparison: all strategies have the same utility")
    out: dict[str, float | None] = {}
    for name, (s, v) in inputs.items():
        if v < 0:
            raise ValueError(f"{name}: violation count must be >= 0")
        out[name] = None if v == 0 else ((s - s_min) / (s_max - s_min) + 1.0) / v
    return out


def kruskal_wallis(*samples: Sequence[float], min_size: int = 5) -> tuple[float, float]:
    """Rank-based H statistic with tie correction and its chi-squared p-value.

    Samples shorter than ``min_size`` only trigger a warning (the chi-squared
    approximation gets rough); fewer than two observations is an error.
    """
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    groups = [np.asarray(s, dtype=np.float64).ravel() for s in samples]
    if any(g.size < 2 for g in groups):
        raise ValueError("each sample needs at least two observations")
    if any(g.size < min_size for g in groups):
        warnings.warn(
            f"sample smaller than {min_size}: chi-squared p-value is approximate",
            SmallSampleWarning,
            stacklevel=2,
        )
    pooled = np.concatenate(groups)
    n = pooled.size
    ranks = rankdata(pooled)
    _, counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - float(np.sum(counts**3 - counts)) / (n**3 - n)
    if correction <= 0:
        return 0.0, 1.0
    h = 0.0
    pos = 0
    for g in groups:
        r = ranks[pos : pos + g.size]
        h += r.sum() ** 2 / g.size
        pos += g.size
    h = (12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)) / correction
    h = max(h, 0.0)
    return float(h), float(chi2.sf(h, len(groups) - 1))


def eta_squared(h: float, n_total: int, k_groups: int) -> float:
    if n_total <= k_groups:
        raise ValueError("n_total must exceed k_groups")
    return max(0.0, (h - k_groups + 1) / (n_total - k_groups))


def effect_label(eta2: float) -> str:
    if eta2 >= 0.14:
        return "large"
    if eta2 >= 0.06:
        return "medium"
    if eta2 >= 0.01:
        return "small"
    return "negligible"
