"""Discrete-time replay of a workload trace against a self-adapting composition."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baselines import doa_reason, qos_history, rbc_reason, tlhca_reason
from .debt import DebtLedger, principal_table
from .forecast import forecast_table
from .model import ServiceRepository, SlaConstraints, WorkloadTrace, validate_plan
from .reasoner import DECISION_HEADER, AdaptationDecision, reason
from .stats import DegenerateComparison, effect_label, eta_squared, kruskal_wallis, sustainability_score

log = logging.getLogger(__name__)

TIMESERIES_HEADER = (
    "timestep",
    "global_utilization",
    "global_latency_s",
    "local_violations",
    "global_violations",
    "adapted",
)


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 5
    train_fraction: float = 2 / 3
    p_max: int = 2
    q_max: int = 2
    refit_every: int = 600
    rbc_k: int = 3
    rbc_window: int = 600
    seed: int = 0
    cost_bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon offset must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


@dataclass
class Context:
    """Everything a strategy may look at when deciding at timestep ``t``."""

    repo: ServiceRepository
    sla: SlaConstraints
    demand: np.ndarray
    forecasts: np.ndarray
    principals: Mapping[str, float]
    config: SimConfig


class Strategy:
    name = ""

    def triggered(self, local_bad: set[int], global_bad: bool) -> bool:
        raise NotImplementedError

    def decide(self, ctx: Context, t: int, plan, infeasible: set[int]) -> AdaptationDecision:
        raise NotImplementedError


class Datesso(Strategy):
    name = "datesso"

    def triggered(self, local_bad, global_bad):
        return bool(local_bad)

    def decide(self, ctx, t, plan, infeasible):
        return reason(plan, ctx.demand[t], ctx.forecasts[t], ctx.repo, ctx.sla, t,
                      ctx.principals, infeasible)


class DebtOblivious(Strategy):
    name = "doa"

    def triggered(self, local_bad, global_bad):
        return bool(local_bad)

    def decide(self, ctx, t, plan, infeasible):
        return doa_reason(plan, ctx.demand[t], ctx.forecasts[t], ctx.repo, ctx.sla, t, ctx.principals)


class HardGlobal(Strategy):
    name = "tlhca"

    def triggered(self, local_bad, global_bad):
        return bool(local_bad) or global_bad

    def decide(self, ctx, t, plan, infeasible):
        return tlhca_reason(plan, ctx.demand[t], ctx.forecasts[t], ctx.repo, ctx.sla, t, ctx.principals)


class RegionBased(Strategy):
    name = "rbc"

    def triggered(self, local_bad, global_bad):
        return global_bad

    def decide(self, ctx, t, plan, infeasible):
        lo = max(0, t + 1 - ctx.config.rbc_window)
        history = []
        for x in range(ctx.repo.abstract_count):
            lat, req = ctx.repo.arrays[x]
            history.append(qos_history(lat, req, ctx.demand[lo : t + 1, x], ctx.sla.local_latency[x]))
        return rbc_reason(plan, ctx.demand[t], ctx.repo, ctx.sla, t, history,
                          ctx.config.rbc_k, ctx.config.seed, force=True)


STRATEGIES: dict[str, type[Strategy]] = {
    cls.name: cls for cls in (Datesso, HardGlobal, DebtOblivious, RegionBased)
}


def get_strategy(name: str) -> Strategy:
    try:
        return STRATEGIES[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}; choose from {sorted(STRATEGIES)}") from None


@dataclass
class SimulationResult:
    strategy: str
    timesteps: np.ndarray
    global_utilization: np.ndarray
    global_latency: np.ndarray
    local_violations: np.ndarray
    global_violations: np.ndarray
    global_latency_violations: np.ndarray
    adapted: np.ndarray
    decisions: list[AdaptationDecision]
    ledger: DebtLedger
    reasoning_times: list[float]
    raw_utility: float
    orders: list[tuple[int, int]] = field(default_factory=list)

    @property
    def local_count(self) -> int:
        return int(self.local_violations.sum())

    @property
    def global_count(self) -> int:
        return int(self.global_violations.sum())

    @property
    def violations(self) -> int:
        return self.local_count + self.global_count

    @property
    def final_debt(self) -> float:
        return self.ledger.total

    @property
    def total_utility(self) -> float:
        """Sum over the run of utilization minus normalized latency, less all debt."""
        return self.raw_utility - self.ledger.total

    @property
    def adaptations(self) -> int:
        return int(self.adapted.sum())

    def debt_series(self) -> np.ndarray:
        return self.ledger.series()

    def median_reasoning_time(self) -> float:
        return float(np.median(self.reasoning_times)) if self.reasoning_times else 0.0

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "timesteps": int(self.timesteps.size),
            "adaptations": self.adaptations,
            "reasoning_invocations": len(self.reasoning_times),
            "local_violations": self.local_count,
            "global_violations": self.global_count,
            "global_latency_violations": int(self.global_latency_violations.sum()),
            "violations": self.violations,
            "final_debt": self.final_debt,
            "total_utility": self.total_utility,
            "mean_global_utilization": float(self.global_utilization.mean()),
            "mean_global_latency_s": float(self.global_latency.mean()),
            "degraded_decisions": sum(1 for d in self.decisions if d.degraded),
        }


def prepare_forecasts(
    trace: WorkloadTrace,
    config: SimConfig,
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Rolling ARFIMA forecasts for every test-split origin; shared by all strategies."""
    split = trace.split(config.train_fraction)
    return forecast_table(
        trace.demand, split, config.horizon, config.p_max, config.q_max, config.refit_every
    )


def run(
    strategy: Strategy | str,
    repo: ServiceRepository,
    trace: WorkloadTrace,
    sla: SlaConstraints,
    config: SimConfig = SimConfig(),
    forecasts: np.ndarray | None = None,
    orders: list[tuple[int, int]] | None = None,
) -> SimulationResult:
    """Replay the test split of ``trace`` with ``strategy`` in charge of adaptation.

    Decisions taken at ``t`` apply from ``t + 1``; the principal of every newly
    composed component is charged at that step.
    """
    if isinstance(strategy, str):
        strategy = get_strategy(strategy)
    n = repo.abstract_count
    if trace.abstract_count != n or sla.abstract_count != n:
        raise ValueError(
            f"dimension mismatch: repository N={n}, trace N={trace.abstract_count}, "
            f"SLA N={sla.abstract_count}"
        )
    if forecasts is None:
        forecasts, orders = prepare_forecasts(trace, config)
    demand = trace.demand
    start = trace.split(config.train_fraction)
    stop = trace.horizon
    principals = principal_table(repo, sla, config.cost_bounds)
    ctx = Context(repo, sla, demand, forecasts, principals, config)

    plan = repo.initial_plan()
    validate_plan(plan, repo)
    ledger = DebtLedger()
    for sid in plan.selection:
        ledger.open(start, sid, 0.0)

    cl = np.asarray(sla.local_latency)
    cu = np.asarray(sla.local_utilization)
    cu_g = sla.global_utilization
    cl_g = sla.global_latency_norm

    def plan_arrays(p):
        svcs = [repo.by_id[s] for s in p.selection]
        return (np.array([s.capacity_latency for s in svcs]),
                np.array([s.capacity_requests for s in svcs], dtype=np.float64))

    lat, req = plan_arrays(plan)
    steps = stop - start
    g_util = np.zeros(steps)
    g_lat = np.zeros(steps)
    local_v = np.zeros(steps, dtype=np.int64)
    global_v = np.zeros(steps, dtype=np.int64)
    glat_v = np.zeros(steps, dtype=bool)
    adapted = np.zeros(steps, dtype=np.int64)
    decisions: list[AdaptationDecision] = []
    times: list[float] = []
    raw_utility = 0.0
    pending: AdaptationDecision | None = None

    for i, t in enumerate(range(start, stop)):
        if pending is not None:
            for x in pending.changed:
                ledger.close(t, plan[x])
                new = pending.new_plan[x]
                ledger.open(t, new, principals[new])
            plan = pending.new_plan
            lat, req = plan_arrays(plan)
            pending = None

        w = demand[t].astype(np.float64)
        work = lat * w
        raw = work / req
        util = np.clip(work / (cl * req), 0.0, 1.0)
        lnorm = np.minimum(work / (cl * req), 1.0)
        lat_ok = raw <= cl
        util_ok = util >= cu
        infeasible = set(np.flatnonzero(~(lat_ok & util_ok)).tolist())
        g_lat[i] = raw.sum()
        g_util[i] = util.mean()
        lat_bad = g_lat[i] > sla.global_latency
        util_bad = g_util[i] < cu_g
        local_v[i] = int(not lat_ok.all()) + int(not util_ok.all())
        global_v[i] = int(lat_bad) + int(util_bad)
        glat_v[i] = lat_bad

        alpha = np.where(cu_g >= util, cu_g - util, 0.0)
        beta = np.where(lnorm >= cl_g, lnorm - cl_g, 0.0)
        for x, sid in enumerate(plan.selection):
            ledger.accrue(t, sid, float(alpha[x]), float(beta[x]))
        raw_utility += float(util.sum() - lnorm.sum())
        ledger.end_step(t)

        if t + 1 < stop and strategy.triggered(infeasible, bool(lat_bad or util_bad)):
            tic = time.perf_counter()
            decision = strategy.decide(ctx, t, plan, infeasible)
            times.append(time.perf_counter() - tic)
            decisions.append(decision)
            if decision.changed:
                validate_plan(decision.new_plan, repo)
                pending = decision
                adapted[i] = 1

    return SimulationResult(
        strategy=strategy.name,
        timesteps=np.arange(start, stop),
        global_utilization=g_util,
        global_latency=g_lat,
        local_violations=local_v,
        global_violations=global_v,
        global_latency_violations=glat_v,
        adapted=adapted,
        decisions=decisions,
        ledger=ledger,
        reasoning_times=times,
        raw_utility=raw_utility,
        orders=list(orders or []),
    )


@dataclass
class ComparisonReport:
    results: dict[str, SimulationResult]
    scores: dict[str, float | None]
    tests: list[dict]
    orders: list[tuple[int, int]]
    note: str = ""

    def to_json(self) -> dict:
        return {
            "strategies": list(self.results),
            "forecast_orders": [list(o) for o in self.orders],
            "summary": {name: r.summary() for name, r in self.results.items()},
            "sustainability": self.scores,
            "sustainability_note": self.note,
            "pairwise_tests": self.tests,
            "accumulated_debt": {name: r.debt_series().tolist() for name, r in self.results.items()},
        }


def pairwise_tests(results: Mapping[str, SimulationResult]) -> list[dict]:
    out = []
    for a, b in combinations(results, 2):
        for metric in ("global_utilization", "global_latency"):
            xa = getattr(results[a], metric)
            xb = getattr(results[b], metric)
            h, p = kruskal_wallis(xa, xb)
            e2 = eta_squared(h, xa.size + xb.size, 2)
            out.append({
                "a": a, "b": b, "metric": metric,
                "H": h, "p": p, "eta_squared": e2,
                "effect": effect_label(e2), "significant": p < 0.05,
            })
    return out


def compare(
    strategies: Sequence[str],
    repo: ServiceRepository,
    trace: WorkloadTrace,
    sla: SlaConstraints,
    config: SimConfig = SimConfig(),
) -> ComparisonReport:
    if len(strategies) < 2:
        raise ValueError("compare needs at least two strategies")
    forecasts, orders = prepare_forecasts(trace, config)
    results: dict[str, SimulationResult] = {}
    for name in strategies:
        strat = get_strategy(name)
        key = strat.name if strat.name not in results else f"{strat.name}#{len(results)}"
        log.info("running %s", key)
        results[key] = run(strat, repo, trace, sla, config, forecasts, orders)
    note = ""
    try:
        scores = sustainability_score({k: (r.total_utility, r.violations) for k, r in results.items()})
    except DegenerateComparison as exc:
        scores = {k: None for k in results}
        note = str(exc)
    if any(v is None for v in scores.values()) and not note:
        note = "strategies with no violations have no score"
    return ComparisonReport(results, scores, pairwise_tests(results), orders, note)


# --- output ----------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def write_result(result: SimulationResult, out_dir) -> Path:
    d = Path(out_dir) / result.strategy
    d.mkdir(parents=True, exist_ok=True)
    with (d / "timeseries.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMESERIES_HEADER)
        for i, t in enumerate(result.timesteps):
            w.writerow([
                int(t),
                _fmt(result.global_utilization[i]),
                _fmt(result.global_latency[i]),
                int(result.local_violations[i]),
                int(result.global_violations[i]),
                int(result.adapted[i]),
            ])
    result.ledger.write_csv(d / "ledger.csv")
    with (d / "decisions.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DECISION_HEADER)
        for dec in result.decisions:
            for row in dec.log_rows():
                w.writerow([*row[:4], _fmt(row[4]), *row[5:]])
    return d


def write_comparison(report: ComparisonReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for result in report.results.values():
        write_result(result, out)
    path = out / "comparison.json"
    path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def timing_table(results: Mapping[str, SimulationResult]) -> dict[str, dict[str, float]]:
    """Wall-clock reasoning statistics; not deterministic, never written with the results."""
    out = {}
    for name, r in results.items():
        t = np.asarray(r.reasoning_times) if r.reasoning_times else np.zeros(1)
        out[name] = {
            "invocations": len(r.reasoning_times),
            "median_s": float(np.median(t)),
            "mean_s": float(t.mean()),
            "p95_s": float(np.quantile(t, 0.95)),
        }
    return out
