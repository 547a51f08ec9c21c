"""Temporal debt model: principal, interest, debt and the debt-aware utility score."""
from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .model import ComponentService, ServiceRepository, SlaConstraints

LEDGER_HEADER = ("timestep", "component_id", "principal", "alpha", "beta", "debt_cumulative")


class ConfigError(ValueError):
    pass


def principal_raw(service: ComponentService, sla: SlaConstraints) -> float:
    """One-off actuation cost in currency: overhead seconds times compute cost."""
    return service.overhead * sla.compute_cost


def default_cost_bounds(repo: ServiceRepository, sla: SlaConstraints) -> tuple[float, float]:
    return 0.0, max(s.overhead for s in repo) * sla.compute_cost


def principal(
    service: ComponentService,
    sla: SlaConstraints,
    bounds: tuple[float, float],
) -> float:
    """Actuation cost min-max normalized into [0, 1]."""
    lo, hi = bounds
    if not hi > lo:
        raise ConfigError(f"cost bounds must satisfy lower < upper, got {bounds}")
    value = (principal_raw(service, sla) - lo) / (hi - lo)
    return min(max(value, 0.0), 1.0)


def principal_table(
    repo: ServiceRepository,
    sla: SlaConstraints,
    bounds: tuple[float, float] | None = None,
) -> dict[str, float]:
    """Normalized principal of every service; all zero when no service has overhead."""
    bounds = bounds or default_cost_bounds(repo, sla)
    if bounds[1] == bounds[0] == 0.0:
        return {s.id: 0.0 for s in repo}
    return {s.id: principal(s, sla, bounds) for s in repo}


def interest(
    utilizations: Sequence[float],
    latencies_norm: Sequence[float],
    cu_global: float,
    cl_global_norm: float,
) -> tuple[float, float]:
    """Utilization shortfall and latency excess against the global bounds.

    Only timesteps where the component is at or beyond the global bound
    contribute, so both terms are non-negative.
    """
    u = np.asarray(utilizations, dtype=np.float64)
    ln = np.asarray(latencies_norm, dtype=np.float64)
    if u.shape != ln.shape:
        raise ValueError(f"series lengths differ: {u.shape} vs {ln.shape}")
    alpha = float(np.sum(np.where(cu_global >= u, cu_global - u, 0.0)))
    beta = float(np.sum(np.where(ln >= cl_global_norm, ln - cl_global_norm, 0.0)))
    return alpha, beta


def debt(principal_value: float, alpha: float, beta: float) -> float:
    return principal_value + alpha + beta


def utility_score(utilizations, latencies_norm, debt_value: float) -> float:
    return float(np.sum(utilizations)) - float(np.sum(latencies_norm)) - debt_value


@dataclass
class DebtRecord:
    """Debt of one component over the epoch it stayed selected."""

    component_id: str
    principal: float
    start: int
    end: int | None = None
    alpha: float = 0.0
    beta: float = 0.0

    @property
    def window(self) -> tuple[int, int | None]:
        return self.start, self.end

    @property
    def debt(self) -> float:
        return self.principal + self.alpha + self.beta

    @property
    def closed(self) -> bool:
        return self.end is not None


@dataclass
class DebtLedger:
    """Single-writer record of principal charges and interest accrual.

    ``cumulative`` holds ``(timestep, total debt after that timestep)`` pairs
    in increasing timestep order.
    """

    records: list[DebtRecord] = field(default_factory=list)
    rows: list[tuple[int, str, float, float, float, float]] = field(default_factory=list)
    cumulative: list[tuple[int, float]] = field(default_factory=list)
    _active: dict[str, DebtRecord] = field(default_factory=dict, repr=False)
    _total: float = 0.0
    _pending: dict[str, list[float]] = field(default_factory=dict, repr=False)

    @property
    def total(self) -> float:
        return self._total

    def open(self, t: int, component_id: str, principal_value: float = 0.0) -> DebtRecord:
        rec = DebtRecord(component_id, principal_value, t)
        self.records.append(rec)
        self._active[component_id] = rec
        if principal_value:
            self._pending.setdefault(component_id, [0.0, 0.0, 0.0])[0] += principal_value
        return rec

    def close(self, t: int, component_id: str) -> None:
        rec = self._active.pop(component_id, None)
        if rec is not None:
            rec.end = t

    def accrue(self, t: int, component_id: str, alpha: float, beta: float) -> None:
        rec = self._active[component_id]
        rec.alpha += alpha
        rec.beta += beta
        entry = self._pending.setdefault(component_id, [0.0, 0.0, 0.0])
        entry[1] += alpha
        entry[2] += beta

    def end_step(self, t: int) -> float:
        """Flush this timestep's charges into the row log and the cumulative series."""
        if self.cumulative and t <= self.cumulative[-1][0]:
            raise ValueError(f"timestep {t} already closed")
        for cid, (p, a, b) in self._pending.items():
            self._total += p + a + b
            self.rows.append((t, cid, p, a, b, self._total))
        self._pending.clear()
        self.cumulative.append((t, self._total))
        return self._total

    def series(self) -> np.ndarray:
        return np.array([v for _, v in self.cumulative], dtype=np.float64)

    def principal_total(self) -> float:
        return sum(r.principal for r in self.records)

    def interest_total(self) -> float:
        return sum(r.alpha + r.beta for r in self.records)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LEDGER_HEADER)
            for t, cid, p, a, b, cum in self.rows:
                w.writerow([t, cid, _fmt(p), _fmt(a), _fmt(b), _fmt(cum)])


def accumulated_debt(ledger: DebtLedger, t: int) -> float:
    """Total debt of the composition from the start of the run up to and including ``t``."""
    i = bisect.bisect_right(ledger.cumulative, t, key=lambda step: step[0])
    return ledger.cumulative[i - 1][1] if i else 0.0


def component_debts(ledger: DebtLedger) -> Mapping[str, float]:
    out: dict[str, float] = {}
    for rec in ledger.records:
        out[rec.component_id] = out.get(rec.component_id, 0.0) + rec.debt
    return out


def _fmt(v: float) -> str:
    return f"{v:.10g}"
