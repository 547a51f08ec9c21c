"""Hard local and soft global latency/utilization constraints.

Constraint checks use raw seconds. The normalized latency used by the debt
arithmetic is the raw latency over the local bound, capped at 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CompositionPlan, ComponentService, ServiceRepository, SlaConstraints


@dataclass(frozen=True)
class LocalObservation:
    latency_raw: float
    latency_norm: float
    utilization: float
    feasible: bool
    latency_ok: bool = True
    utilization_ok: bool = True


@dataclass(frozen=True)
class GlobalObservation:
    latency: float
    utilization: float
    latency_violated: bool
    utilization_violated: bool
    latency_norm: float = 0.0

    @property
    def violations(self) -> int:
        return int(self.latency_violated) + int(self.utilization_violated)


def local_latency(service: ComponentService, w: float, cl: float | None = None) -> tuple[float, float]:
    """Per-request latency under workload ``w`` and its normalized form.

    Without ``cl`` the normalized value cannot be formed and is returned as nan.
    """
    if w < 0:
        raise ValueError("workload must be >= 0")
    work = service.capacity_latency * w
    raw = work / service.capacity_requests
    norm = min(work / (cl * service.capacity_requests), 1.0) if cl is not None else float("nan")
    return raw, norm


def local_utilization(service: ComponentService, w: float, sla: SlaConstraints) -> float:
    if w < 0:
        raise ValueError("workload must be >= 0")
    cl = sla.local_latency[service.abstract_index]
    u = (service.capacity_latency * w) / (cl * service.capacity_requests)
    return min(max(u, 0.0), 1.0)


def observe_local(service: ComponentService, w: float, sla: SlaConstraints) -> LocalObservation:
    x = service.abstract_index
    cl = sla.local_latency[x]
    raw, norm = local_latency(service, w, cl)
    util = local_utilization(service, w, sla)
    lat_ok = raw <= cl
    util_ok = util >= sla.local_utilization[x]
    return LocalObservation(raw, norm, util, lat_ok and util_ok, lat_ok, util_ok)


def is_feasible(service: ComponentService, w: float, sla: SlaConstraints) -> bool:
    return observe_local(service, w, sla).feasible


def violation_magnitude(service: ComponentService, w: float, sla: SlaConstraints) -> float:
    """Normalized latency excess plus utilization shortfall (0 when feasible)."""
    obs = observe_local(service, w, sla)
    x = service.abstract_index
    cl = sla.local_latency[x]
    return max(0.0, obs.latency_raw - cl) / cl + max(0.0, sla.local_utilization[x] - obs.utilization)


def global_observe(
    plan: CompositionPlan,
    w_row,
    sla: SlaConstraints,
    repo: ServiceRepository,
) -> GlobalObservation:
    """Sequential aggregation over the selected components; never raises on violation."""
    n = len(plan)
    if len(w_row) != n:
        raise ValueError(f"workload row has {len(w_row)} entries for {n} abstract services")
    latency = 0.0
    util = 0.0
    for x, sid in enumerate(plan.selection):
        svc = repo.by_id[sid]
        latency += local_latency(svc, w_row[x])[0]
        util += local_utilization(svc, w_row[x], sla)
    util /= n
    norm = min(latency / (n * max(sla.local_latency)), 1.0)
    return GlobalObservation(
        latency=latency,
        utilization=util,
        latency_violated=latency > sla.global_latency,
        utilization_violated=util < sla.global_utilization,
        latency_norm=norm,
    )


def plan_arrays(plan: CompositionPlan, repo: ServiceRepository) -> tuple[np.ndarray, np.ndarray]:
    """Capacity latency and requests of the selected components, aligned with the plan."""
    svcs = [repo.by_id[sid] for sid in plan.selection]
    lat = np.array([s.capacity_latency for s in svcs], dtype=np.float64)
    req = np.array([s.capacity_requests for s in svcs], dtype=np.float64)
    return lat, req


def observe_plan_series(
    plan: CompositionPlan,
    workloads: np.ndarray,
    sla: SlaConstraints,
    repo: ServiceRepository,
) -> dict[str, np.ndarray]:
    """Vectorized local and global observations of ``plan`` over rows of ``workloads``.

    ``workloads`` has shape (steps, N). Returned arrays are (steps, N) for the
    local quantities and (steps,) for the global ones.
    """
    w = np.atleast_2d(np.asarray(workloads, dtype=np.float64))
    lat, req = plan_arrays(plan, repo)
    cl = np.asarray(sla.local_latency)
    cu = np.asarray(sla.local_utilization)
    work = lat * w
    raw = work / req
    util = np.clip(work / (cl * req), 0.0, 1.0)
    lat_ok = raw <= cl
    util_ok = util >= cu
    g_lat = raw.sum(axis=1)
    g_util = util.mean(axis=1)
    return {
        "raw": raw,
        "util": util,
        "lnorm": np.minimum(work / (cl * req), 1.0),
        "latency_ok": lat_ok,
        "utilization_ok": util_ok,
        "global_latency": g_lat,
        "global_utilization": g_util,
        "global_latency_violated": g_lat > sla.global_latency,
        "global_utilization_violated": g_util < sla.global_utilization,
    }
