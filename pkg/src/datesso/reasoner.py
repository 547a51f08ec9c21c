"""Debt-aware two-level constraint reasoning: identification and per-service search.

Global constraints never gate the search; they only enter through the
interest terms of each candidate's utility score. The search decomposes by
abstract service, so the cost is linear in the number of problematic
services rather than exponential.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .constraints import violation_magnitude
from .debt import principal_table
from .forecast import round_workload
from .model import CompositionPlan, ServiceRepository, SlaConstraints


@dataclass(frozen=True)
class FeasibilityRow:
    """Feasible candidate ids of one abstract service at each forecast step ``n+1..m``.

    ``current`` holds the candidates feasible at the realized workload of step
    ``n``; survivors must also belong to it. ``util``, ``lnorm`` and
    ``feasible`` are the candidate x step grids the vectors were built from.
    """

    abstract_index: int
    n: int
    candidates: tuple[str, ...]
    vectors: tuple[tuple[str, ...], ...]
    current: tuple[str, ...]
    util: np.ndarray = field(repr=False)
    lnorm: np.ndarray = field(repr=False)
    feasible: np.ndarray = field(repr=False)
    current_feasible: np.ndarray = field(repr=False)
    evaluations: int = 0

    @property
    def m(self) -> int:
        return self.n + len(self.vectors)

    def survivors(self, m: int) -> tuple[str, ...]:
        """Candidates feasible now and at every step of ``(n, m]``, in repository order."""
        steps = m - self.n
        ok = self.current_feasible & self.feasible[:, :steps].all(axis=1)
        return tuple(c for c, keep in zip(self.candidates, ok) if keep)


FeasibilityMatrix = dict[int, FeasibilityRow]


@dataclass(frozen=True)
class AdaptationDecision:
    timestep: int
    old_plan: CompositionPlan
    new_plan: CompositionPlan
    replaced: frozenset[int]
    horizon_used: int
    per_service_scores: Mapping[int, float]
    evaluation_count: int = 0
    fallback: frozenset[int] = frozenset()
    global_violation: bool = False
    strategy: str = "datesso"

    @property
    def changed(self) -> list[int]:
        return self.old_plan.diff(self.new_plan)

    @property
    def degraded(self) -> bool:
        return bool(self.fallback)

    def log_rows(self):
        for x in sorted(self.replaced):
            yield (
                self.timestep,
                x,
                self.old_plan[x],
                self.new_plan[x],
                self.per_service_scores.get(x, float("nan")),
                self.horizon_used,
                int(x in self.fallback),
                self.strategy,
            )


DECISION_HEADER = (
    "timestep",
    "abstract_index",
    "old_id",
    "new_id",
    "score",
    "horizon_used",
    "fallback_flag",
    "strategy",
)


def identify_infeasible(
    plan: CompositionPlan,
    w_now: Sequence[float],
    sla: SlaConstraints,
    repo: ServiceRepository,
) -> set[int]:
    out = set()
    for x, sid in enumerate(plan.selection):
        svc = repo.by_id[sid]
        cl = sla.local_latency[x]
        work = svc.capacity_latency * w_now[x]
        raw = work / svc.capacity_requests
        util = min(max(work / (cl * svc.capacity_requests), 0.0), 1.0)
        if raw > cl or util < sla.local_utilization[x]:
            out.add(x)
    return out


def build_feasibility_matrix(
    x: int,
    repo: ServiceRepository,
    forecasts: Sequence[float],
    sla: SlaConstraints,
    n: int = 0,
    w_now: float | None = None,
) -> FeasibilityRow:
    """Feasibility of every candidate of ``x`` at each forecast step (rounded half-up).

    Without ``w_now`` no current-step gate is applied.
    """
    lat, req = repo.arrays[x]
    ids = tuple(s.id for s in repo.candidates[x])
    w = round_workload(forecasts).astype(np.float64)
    cl = sla.local_latency[x]
    cu = sla.local_utilization[x]
    raw, util, feas = kernels.evaluate_candidates(lat, req, w, cl, cu)
    # same expression as the utilization so the two agree bit for bit
    lnorm = np.minimum(lat[:, None] * w[None, :] / (cl * req[:, None]), 1.0)
    if w_now is None:
        now = np.ones(len(ids), dtype=bool)
    else:
        _, _, f_now = kernels.evaluate_candidates(lat, req, np.array([float(w_now)]), cl, cu)
        now = f_now[:, 0]
    vectors = tuple(tuple(c for c, ok in zip(ids, feas[:, j]) if ok) for j in range(w.size))
    current = tuple(c for c, ok in zip(ids, now) if ok)
    return FeasibilityRow(x, n, ids, vectors, current, util, lnorm, feas, now, len(ids) * w.size)


def largest_feasible_step(row: FeasibilityRow, n: int | None = None, m: int | None = None) -> int:
    """Largest ``m_x <= m`` such that one candidate stays feasible on all of ``(n, m_x]``.

    Returns ``n + 1`` when nothing survives the first step; the caller then
    falls back (see :func:`reason`).
    """
    n = row.n if n is None else n
    m = row.m if m is None else m
    alive = row.current_feasible.copy()
    best = n
    for j in range(m - n):
        alive &= row.feasible[:, j]
        if not alive.any():
            break
        best = n + j + 1
    return max(best, n + 1)


def has_survivor(row: FeasibilityRow) -> bool:
    return bool((row.current_feasible & row.feasible[:, 0]).any()) if row.vectors else False


def candidate_scores(
    row: FeasibilityRow,
    m: int,
    incumbent: str,
    principals: Mapping[str, float],
    sla: SlaConstraints,
    include_debt: bool = True,
) -> np.ndarray:
    """Utility score of every candidate of the row over ``(n, m]``.

    Principal is only charged to candidates other than the incumbent.
    """
    pr = np.array([0.0 if c == incumbent else principals[c] for c in row.candidates])
    score, _, _ = kernels.window_scores(
        row.util, row.lnorm, m - row.n, pr,
        sla.global_utilization, sla.global_latency_norm, include_debt,
    )
    return score


def search_utility(
    survivors: Sequence[str],
    row: FeasibilityRow,
    m: int,
    incumbent: str,
    principals: Mapping[str, float],
    sla: SlaConstraints,
    include_debt: bool = True,
) -> tuple[str, float]:
    """Exhaustive argmax of the utility score over ``survivors``; first listed wins ties."""
    if not survivors:
        raise ValueError(f"no survivors for abstract service {row.abstract_index}; shrink m first")
    scores = candidate_scores(row, m, incumbent, principals, sla, include_debt)
    keep = set(survivors)
    best_id, best = None, -np.inf
    for c, s in zip(row.candidates, scores):
        if c in keep and s > best:
            best_id, best = c, float(s)
    return best_id, best


def _fallback_choice(
    row: FeasibilityRow,
    repo: ServiceRepository,
    forecasts: Sequence[float],
    w_now: float | None,
    sla: SlaConstraints,
) -> str:
    points = [round_workload(forecasts[0]).item()]
    if w_now is not None:
        points.append(w_now)
    best_id, best = None, np.inf
    for svc in repo.candidates[row.abstract_index]:
        v = sum(violation_magnitude(svc, w, sla) for w in points)
        if v < best:
            best_id, best = svc.id, v
    return best_id


def search(
    plan: CompositionPlan,
    targets: Sequence[int],
    w_now: Sequence[float],
    forecasts: np.ndarray,
    repo: ServiceRepository,
    sla: SlaConstraints,
    n: int = 0,
    principals: Mapping[str, float] | None = None,
    include_debt: bool = True,
    strategy: str = "datesso",
) -> AdaptationDecision:
    """Search step over an explicit set of abstract services (possibly empty)."""
    forecasts = np.asarray(forecasts, dtype=np.float64)
    if forecasts.ndim != 2 or forecasts.shape[1] != repo.abstract_count:
        raise ValueError(f"forecasts must have shape (h, {repo.abstract_count})")
    if principals is None:
        principals = principal_table(repo, sla)
    h = forecasts.shape[0]
    targets = sorted(set(targets))
    rows = {
        x: build_feasibility_matrix(x, repo, forecasts[:, x], sla, n, w_now[x])
        for x in targets
    }
    m = n + h
    for row in rows.values():
        m = min(m, largest_feasible_step(row, n, n + h))
    updates: dict[int, str] = {}
    scores: dict[int, float] = {}
    fallback = set()
    for x, row in rows.items():
        survivors = row.survivors(m)
        if survivors:
            updates[x], scores[x] = search_utility(
                survivors, row, m, plan[x], principals, sla, include_debt
            )
        else:
            fallback.add(x)
            updates[x] = _fallback_choice(row, repo, forecasts[:, x], w_now[x], sla)
            scores[x] = float(candidate_scores(row, m, plan[x], principals, sla, include_debt)[
                row.candidates.index(updates[x])
            ])
    return AdaptationDecision(
        timestep=n,
        old_plan=plan,
        new_plan=plan.with_updates(updates),
        replaced=frozenset(targets),
        horizon_used=m - n,
        per_service_scores=scores,
        evaluation_count=sum(r.evaluations for r in rows.values()),
        fallback=frozenset(fallback),
        strategy=strategy,
    )


def reason(
    plan: CompositionPlan,
    w_now: Sequence[float],
    forecasts: np.ndarray,
    repo: ServiceRepository,
    sla: SlaConstraints,
    n: int = 0,
    principals: Mapping[str, float] | None = None,
    infeasible: set[int] | None = None,
) -> AdaptationDecision:
    """Replace every locally infeasible component by its best debt-aware survivor.

    ``forecasts`` has shape (m - n, N): predicted workloads for steps n+1..m.
    Raises ValueError when no component is infeasible (nothing to adapt).
    """
    if infeasible is None:
        infeasible = identify_infeasible(plan, w_now, sla, repo)
    if not infeasible:
        raise ValueError("reason() called without a local constraint violation")
    return search(plan, sorted(infeasible), w_now, forecasts, repo, sla, n, principals)
