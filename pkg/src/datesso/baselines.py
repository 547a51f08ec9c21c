"""Comparison strategies: hard global constraints, debt-oblivious and region-based selection."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .constraints import global_observe, is_feasible, violation_magnitude
from .model import CompositionPlan, ServiceRepository, SlaConstraints
from .reasoner import AdaptationDecision, identify_infeasible, search
from .forecast import round_workload


def forecast_global_violation(
    plan: CompositionPlan,
    forecasts: np.ndarray,
    repo: ServiceRepository,
    sla: SlaConstraints,
    steps: int,
) -> bool:
    """True if ``plan`` breaks a global bound at any of the first ``steps`` forecast rows."""
    w = round_workload(forecasts[:steps]).astype(np.float64)
    for row in w:
        lat = 0.0
        util = 0.0
        for x, sid in enumerate(plan.selection):
            svc = repo.by_id[sid]
            work = svc.capacity_latency * row[x]
            lat += work / svc.capacity_requests
            util += min(work / (sla.local_latency[x] * svc.capacity_requests), 1.0)
        if lat > sla.global_latency or util / len(plan) < sla.global_utilization:
            return True
    return False


def tlhca_reason(
    plan: CompositionPlan,
    w_now: Sequence[float],
    forecasts: np.ndarray,
    repo: ServiceRepository,
    sla: SlaConstraints,
    n: int = 0,
    principals: Mapping[str, float] | None = None,
) -> AdaptationDecision:
    """Treat global bounds as hard: widen the search to every service when they break."""
    infeasible = identify_infeasible(plan, w_now, sla, repo)
    first = search(plan, sorted(infeasible), w_now, forecasts, repo, sla, n, principals, strategy="tlhca")
    if not forecast_global_violation(first.new_plan, forecasts, repo, sla, first.horizon_used):
        return first
    everything = range(repo.abstract_count)
    if len(first.replaced) == repo.abstract_count:
        return replace(first, global_violation=True)
    second = search(plan, everything, w_now, forecasts, repo, sla, n, principals, strategy="tlhca")
    still = forecast_global_violation(second.new_plan, forecasts, repo, sla, second.horizon_used)
    return replace(
        second,
        evaluation_count=first.evaluation_count + second.evaluation_count,
        global_violation=still,
    )


def doa_reason(
    plan: CompositionPlan,
    w_now: Sequence[float],
    forecasts: np.ndarray,
    repo: ServiceRepository,
    sla: SlaConstraints,
    n: int = 0,
    principals: Mapping[str, float] | None = None,
) -> AdaptationDecision:
    """Same pipeline as DATESSO with the debt term dropped from the score."""
    infeasible = identify_infeasible(plan, w_now, sla, repo)
    if not infeasible:
        raise ValueError("doa_reason() called without a local constraint violation")
    return search(
        plan, sorted(infeasible), w_now, forecasts, repo, sla, n, principals,
        include_debt=False, strategy="doa",
    )


@dataclass(frozen=True)
class Region:
    centroid: tuple[float, float]
    members: tuple[str, ...]


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iter: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding. Returns (centroids, labels)."""
    pts = np.asarray(points, dtype=np.float64)
    rng = np.random.default_rng(seed)
    n = pts.shape[0]
    centroids = [pts[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(((pts[:, None, :] - np.array(centroids)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total <= 0:
            centroids.append(centroids[0])
            continue
        centroids.append(pts[rng.choice(n, p=d2 / total)])
    c = np.array(centroids)
    labels = np.full(n, -1)
    for _ in range(max_iter):
        dist = ((pts[:, None, :] - c[None]) ** 2).sum(-1)
        new = dist.argmin(axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            mask = labels == j
            if mask.any():
                c[j] = pts[mask].mean(axis=0)
    return c, labels


def cluster_regions(
    ids: Sequence[str],
    history: np.ndarray,
    k: int = 3,
    seed: int = 0,
) -> list[Region]:
    """Group candidates by (mean utilization, mean normalized latency) of their history.

    ``history`` has shape (candidates, records, 2). Regions are returned with
    centroids ordered by utilization, highest first; empty clusters are dropped.
    """
    pts = np.asarray(history, dtype=np.float64).mean(axis=1)
    k = max(1, min(k, len(ids)))
    centroids, labels = kmeans(pts, k, seed)
    regions = []
    for j in range(k):
        members = tuple(c for c, lab in zip(ids, labels) if lab == j)
        if members:
            regions.append(Region((float(centroids[j, 0]), float(centroids[j, 1])), members))
    regions.sort(key=lambda r: -r.centroid[0])
    return regions


def synthetic_history(repo: ServiceRepository, sla: SlaConstraints, x: int, points: int = 20) -> np.ndarray:
    """Cold-start history: each candidate observed across workloads up to the largest capacity."""
    lat, req = repo.arrays[x]
    cl = sla.local_latency[x]
    top = float(np.max(cl * req / lat))
    w = np.linspace(0.0, top, points)
    return qos_history(lat, req, w, cl)


def qos_history(lat: np.ndarray, req: np.ndarray, workloads: np.ndarray, cl: float) -> np.ndarray:
    """(candidates, records, 2) array of utilization and normalized latency."""
    raw = lat[:, None] * np.asarray(workloads, dtype=np.float64)[None, :] / req[:, None]
    util = np.clip(raw / cl, 0.0, 1.0)
    lnorm = np.minimum(raw / cl, 1.0)
    return np.stack((util, lnorm), axis=-1)


def rbc_reason(
    plan: CompositionPlan,
    w_now: Sequence[float],
    repo: ServiceRepository,
    sla: SlaConstraints,
    n: int = 0,
    history: Sequence[np.ndarray] | None = None,
    k: int = 3,
    seed: int = 0,
    force: bool = False,
) -> AdaptationDecision:
    """Region-based selection, triggered by global violations at the current step.

    ``history[x]`` is the (candidates, records, 2) QoS history of abstract
    service ``x``; without it a capacity-derived history is used. Regions are
    recomputed from the history on every call.
    """
    obs = global_observe(plan, w_now, sla, repo)
    if not (force or obs.latency_violated or obs.utilization_violated):
        return AdaptationDecision(n, plan, plan, frozenset(), 0, {}, strategy="rbc")
    updates: dict[int, str] = {}
    scores: dict[int, float] = {}
    fallback = set()
    evals = 0
    for x, group in enumerate(repo.candidates):
        ids = [s.id for s in group]
        hist = synthetic_history(repo, sla, x) if history is None else np.asarray(history[x])
        regions = cluster_regions(ids, hist, k, seed)
        rank = dict(zip(ids, hist[:, :, 0].mean(axis=1) - hist[:, :, 1].mean(axis=1)))
        by_id = repo.by_id
        chosen = None
        for region in regions:
            live = []
            for cid in region.members:
                evals += 1
                if is_feasible(by_id[cid], w_now[x], sla):
                    live.append(cid)
            if live:
                chosen = max(live, key=lambda c: (rank[c], -ids.index(c)))
                break
        if chosen is None:
            fallback.add(x)
            chosen = min(ids, key=lambda c: (violation_magnitude(by_id[c], w_now[x], sla), ids.index(c)))
        updates[x] = chosen
        scores[x] = float(rank[chosen])
    return AdaptationDecision(
        timestep=n,
        old_plan=plan,
        new_plan=plan.with_updates(updates),
        replaced=frozenset(range(repo.abstract_count)),
        horizon_used=0,
        per_service_scores=scores,
        evaluation_count=evals,
        fallback=frozenset(fallback),
        strategy="rbc",
    )
