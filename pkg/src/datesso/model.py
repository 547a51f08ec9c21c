"""Domain types, CSV ingestion and synthetic data for service compositions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

REPOSITORY_HEADER = (
    "abstract_index",
    "service_id",
    "capacity_requests",
    "capacity_latency_s",
    "overhead_s",
)


class IngestionError(ValueError):
    """Raised when an input file does not match its canonical format."""

    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class ComponentService:
    """A concrete candidate that can process ``capacity_requests`` in ``capacity_latency`` seconds."""

    id: str
    abstract_index: int
    capacity_requests: int
    capacity_latency: float
    overhead: float = 0.0

    def __post_init__(self):
        if self.capacity_requests < 1:
            raise ValueError(f"{self.id}: capacity_requests must be >= 1")
        if not (self.capacity_latency > 0 and math.isfinite(self.capacity_latency)):
            raise ValueError(f"{self.id}: capacity_latency must be positive and finite")
        if not (self.overhead >= 0 and math.isfinite(self.overhead)):
            raise ValueError(f"{self.id}: overhead must be non-negative")

    @property
    def service_time(self) -> float:
        """Seconds per request at the nominal capacity."""
        return self.capacity_latency / self.capacity_requests


@dataclass(frozen=True)
class ServiceRepository:
    candidates: tuple[tuple[ComponentService, ...], ...]

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("repository needs at least one abstract service")
        seen: set[str] = set()
        for x, group in enumerate(self.candidates):
            if not group:
                raise ValueError(f"abstract service {x} has no candidates")
            for svc in group:
                if svc.abstract_index != x:
                    raise ValueError(f"{svc.id} listed under {x} but realizes {svc.abstract_index}")
                if svc.id in seen:
                    raise ValueError(f"duplicate service id {svc.id}")
                seen.add(svc.id)

    @classmethod
    def from_services(cls, services: Iterable[ComponentService]) -> "ServiceRepository":
        groups: dict[int, list[ComponentService]] = {}
        for svc in services:
            groups.setdefault(svc.abstract_index, []).append(svc)
        n = max(groups) + 1 if groups else 0
        return cls(tuple(tuple(groups.get(x, ())) for x in range(n)))

    @property
    def abstract_count(self) -> int:
        return len(self.candidates)

    def __len__(self) -> int:
        return sum(len(g) for g in self.candidates)

    def __iter__(self):
        for group in self.candidates:
            yield from group

    @cached_property
    def by_id(self) -> dict[str, ComponentService]:
        return {svc.id: svc for svc in self}

    @cached_property
    def arrays(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        """Per abstract service: (capacity_latency, capacity_requests) as float arrays."""
        out = []
        for group in self.candidates:
            lat = np.array([s.capacity_latency for s in group], dtype=np.float64)
            req = np.array([s.capacity_requests for s in group], dtype=np.float64)
            out.append((lat, req))
        return tuple(out)

    @cached_property
    def position(self) -> dict[str, int]:
        """Index of each service inside its abstract service's candidate list."""
        return {s.id: i for group in self.candidates for i, s in enumerate(group)}

    def initial_plan(self) -> "CompositionPlan":
        return CompositionPlan(tuple(group[0].id for group in self.candidates))


@dataclass(frozen=True)
class CompositionPlan:
    selection: tuple[str, ...]

    def __getitem__(self, x: int) -> str:
        return self.selection[x]

    def __len__(self) -> int:
        return len(self.selection)

    def with_updates(self, updates: Mapping[int, str]) -> "CompositionPlan":
        sel = list(self.selection)
        for x, sid in updates.items():
            sel[x] = sid
        return CompositionPlan(tuple(sel))

    def diff(self, other: "CompositionPlan") -> list[int]:
        return [x for x, (a, b) in enumerate(zip(self.selection, other.selection)) if a != b]


def validate_plan(plan: CompositionPlan, repo: ServiceRepository) -> None:
    """Raise PlanError unless ``plan`` selects exactly one valid candidate per abstract service."""
    if len(plan) != repo.abstract_count:
        raise PlanError(f"plan has {len(plan)} selections for {repo.abstract_count} abstract services")
    for x, sid in enumerate(plan.selection):
        svc = repo.by_id.get(sid)
        if svc is None or svc.abstract_index != x:
            raise PlanError(f"{sid!r} is not a candidate of abstract service {x}")


@dataclass(frozen=True)
class SlaConstraints:
    """Local and global bounds; defaults follow the reference experiment settings."""

    local_latency: tuple[float, ...]
    local_utilization: tuple[float, ...]
    global_latency: float = 1.0
    global_utilization: float = 0.9
    compute_cost: float = 0.0025

    def __post_init__(self):
        if len(self.local_latency) != len(self.local_utilization):
            raise ValueError("local latency and utilization bounds differ in length")
        if any(not (b > 0) for b in self.local_latency) or not self.global_latency > 0:
            raise ValueError("latency bounds must be > 0")
        for u in (*self.local_utilization, self.global_utilization):
            if not 0 < u <= 1:
                raise ValueError("utilization bounds must lie in (0, 1]")
        if self.compute_cost < 0:
            raise ValueError("compute_cost must be >= 0")

    @classmethod
    def uniform(
        cls,
        n: int,
        local_latency: float = 0.09,
        local_utilization: float = 0.8,
        global_latency: float = 1.0,
        global_utilization: float = 0.9,
        compute_cost: float = 0.0025,
    ) -> "SlaConstraints":
        return cls(
            (local_latency,) * n,
            (local_utilization,) * n,
            global_latency,
            global_utilization,
            compute_cost,
        )

    @property
    def abstract_count(self) -> int:
        return len(self.local_latency)

    @property
    def global_latency_norm(self) -> float:
        # Global latency normalized by the largest sum of local bounds, capped at 1.
        denom = self.abstract_count * max(self.local_latency)
        return min(self.global_latency / denom, 1.0)


@dataclass(frozen=True)
class WorkloadTrace:
    demand: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.demand)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("demand must be a non-empty 2-D matrix")
        if not np.issubdtype(d.dtype, np.integer):
            if not np.all(np.equal(np.mod(d, 1), 0)):
                raise ValueError("demand must be integral")
        if (d < 0).any():
            raise ValueError("demand must be non-negative")
        d = d.astype(np.int64)
        d.setflags(write=False)
        object.__setattr__(self, "demand", d)

    @property
    def horizon(self) -> int:
        return self.demand.shape[0]

    @property
    def abstract_count(self) -> int:
        return self.demand.shape[1]

    def split(self, fraction: float = 2 / 3) -> int:
        """Number of leading rows used for training."""
        return int(math.floor(fraction * self.horizon))

    def __eq__(self, other):
        if not isinstance(other, WorkloadTrace):
            return NotImplemented
        return np.array_equal(self.demand, other.demand)

    __hash__ = None  # type: ignore[assignment]


# --- CSV formats -----------------------------------------------------------


def load_repository(path) -> ServiceRepository:
    path = Path(path)
    groups: dict[int, list[ComponentService]] = {}
    ids: dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != REPOSITORY_HEADER:
            raise IngestionError(path, 1, f"expected header {','.join(REPOSITORY_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(REPOSITORY_HEADER):
                raise IngestionError(path, lineno, f"expected 5 fields, got {len(row)}")
            try:
                x = int(row[0])
                sid = row[1].strip()
                t_req = int(row[2])
                lat = float(row[3])
                ovh = float(row[4])
            except ValueError as exc:
                raise IngestionError(path, lineno, f"malformed row: {exc}") from None
            if x < 0:
                raise IngestionError(path, lineno, "negative abstract_index")
            if not sid:
                raise IngestionError(path, lineno, "empty service_id")
            if sid in ids:
                raise IngestionError(path, lineno, f"duplicate service_id {sid!r} (first on line {ids[sid]})")
            if t_req < 1 or not (lat > 0 and math.isfinite(lat)):
                raise IngestionError(path, lineno, "capacity must be positive")
            if not (ovh >= 0 and math.isfinite(ovh)):
                raise IngestionError(path, lineno, "overhead must be non-negative")
            ids[sid] = lineno
            groups.setdefault(x, []).append(ComponentService(sid, x, t_req, lat, ovh))
    if not groups:
        raise IngestionError(path, None, "no services")
    n = max(groups) + 1
    missing = [x for x in range(n) if x not in groups]
    if missing:
        raise IngestionError(path, None, f"abstract service(s) {missing} have no candidates")
    return ServiceRepository(tuple(tuple(groups[x]) for x in range(n)))


def save_repository(repo: ServiceRepository, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPOSITORY_HEADER)
        for svc in repo:
            w.writerow([
                svc.abstract_index,
                svc.id,
                svc.capacity_requests,
                repr(float(svc.capacity_latency)),
                repr(float(svc.overhead)),
            ])


def load_workload(path) -> WorkloadTrace:
    path = Path(path)
    rows: list[list[int]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "timestep" or len(header) < 2:
            raise IngestionError(path, 1, "expected header timestep,w_0,...")
        expected = [f"w_{i}" for i in range(len(header) - 1)]
        if [h.strip() for h in header[1:]] != expected:
            raise IngestionError(path, 1, f"expected columns {','.join(expected)}")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise IngestionError(path, lineno, f"ragged row: {len(row)} fields, expected {width}")
            try:
                values = [int(c) for c in row]
            except ValueError as exc:
                raise IngestionError(path, lineno, f"malformed row: {exc}") from None
            if values[0] != len(rows):
                raise IngestionError(path, lineno, f"timestep {values[0]} out of sequence, expected {len(rows)}")
            if any(v < 0 for v in values[1:]):
                raise IngestionError(path, lineno, "negative demand")
            rows.append(values[1:])
    if not rows:
        raise IngestionError(path, None, "no timesteps")
    return WorkloadTrace(np.array(rows, dtype=np.int64))


def save_workload(trace: WorkloadTrace, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestep", *(f"w_{i}" for i in range(trace.abstract_count))])
        for t, row in enumerate(trace.demand):
            w.writerow([t, *(int(v) for v in row)])


# --- synthetic data --------------------------------------------------------


@dataclass(frozen=True)
class BurstProfile:
    """Shape of a synthetic workload: base load, diurnal cycle and long-memory bursts.

    With ``burst_amplitude == 0`` the trace is a rounded sinusoid around
    ``base_level`` with amplitude ``diurnal_amplitude``.
    """

    base_level: float = 120.0
    diurnal_amplitude: float = 30.0
    diurnal_period: int = 2400
    burst_amplitude: float = 1.0
    noise_scale: float = 3.0
    memory_d: float = 0.3
    burst_rate: float = 0.002
    burst_height: float = 0.8
    burst_duration: float = 40.0
    column_spread: float = 0.25


def _long_memory_noise(rng: np.random.Generator, n: int, d: float, burn: int = 1000) -> np.ndarray:
    # MA(inf) representation of (1-B)^-d applied to Gaussian innovations.
    k = np.arange(1, n + burn)
    psi = np.concatenate(([1.0], np.cumprod((k - 1 + d) / k)))
    eps = rng.standard_normal(n + burn)
    return np.convolve(eps, psi)[burn : burn + n]


def generate_synthetic_trace(
    seed: int,
    horizon: int,
    n: int,
    profile: BurstProfile | None = None,
) -> WorkloadTrace:
    """Deterministic bursty workload with long memory, one column per abstract service."""
    if horizon < 1 or n < 1:
        raise ValueError("horizon and n must be >= 1")
    profile = profile or BurstProfile()
    rng = np.random.default_rng(seed)
    t = np.arange(horizon, dtype=np.float64)
    cols = []
    for _ in range(n):
        scale = 1.0 + profile.column_spread * rng.uniform(-1.0, 1.0)
        phase = rng.uniform(0.0, 2 * math.pi)
        base = profile.base_level * scale
        smooth = base + profile.diurnal_amplitude * scale * np.sin(2 * math.pi * t / profile.diurnal_period + phase)
        noise = profile.noise_scale * scale * _long_memory_noise(rng, horizon, profile.memory_d)
        starts = rng.random(horizon) < profile.burst_rate
        spikes = np.zeros(horizon)
        for s in np.flatnonzero(starts):
            length = max(1, int(rng.exponential(profile.burst_duration)))
            height = profile.burst_height * base * rng.uniform(0.5, 1.5)
            decay = np.exp(-np.arange(min(length, horizon - s)) / max(length / 3.0, 1.0))
            spikes[s : s + decay.size] += height * decay
        cols.append(smooth + profile.burst_amplitude * (noise + spikes))
    demand = np.floor(np.column_stack(cols) + 0.5)
    return WorkloadTrace(np.clip(demand, 0, None).astype(np.int64))


def generate_synthetic_repository(
    seed: int,
    trace: WorkloadTrace,
    candidates: int = 10,
    sla: SlaConstraints | None = None,
    overhead_range: tuple[float, float] = (1.0, 10.0),
) -> ServiceRepository:
    """Random repository whose capacities cover the workload range of ``trace``.

    Each candidate's saturating workload ``CL * T / L`` is spread log-uniformly
    over the observed workload range of its abstract service, so that feasible
    bands overlap most of the time without covering every burst.
    """
    n = trace.abstract_count
    sla = sla or SlaConstraints.uniform(n)
    rng = np.random.default_rng(seed)
    services = []
    for x in range(n):
        col = trace.demand[:, x]
        lo = max(float(np.quantile(col, 0.01)), 1.0)
        hi = max(float(np.quantile(col, 0.995)) * 1.05, lo * 1.3)
        grid = np.exp(np.linspace(math.log(lo * 1.1), math.log(hi), candidates))
        step = math.log(hi / lo) / max(candidates, 1)
        order = rng.permutation(candidates)
        for y in range(candidates):
            sat = grid[order[y]] * math.exp(rng.uniform(-0.3, 0.3) * step)
            t_req = int(rng.integers(20, 201))
            lat = sla.local_latency[x] * t_req / sat
            ovh = round(float(rng.uniform(*overhead_range)), 3)
            services.append(ComponentService(f"c{x}_{y}", x, t_req, lat, ovh))
    return ServiceRepository.from_services(services)


def as_trace(rows: Sequence[Sequence[int]]) -> WorkloadTrace:
    return WorkloadTrace(np.array(rows, dtype=np.int64))
