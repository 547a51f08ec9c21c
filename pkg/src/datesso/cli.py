"""Command-line entry point: simulate, compare, forecast-eval and gen-trace.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import (
    BurstProfile,
    IngestionError,
    ServiceRepository,
    SlaConstraints,
    WorkloadTrace,
    generate_synthetic_repository,
    generate_synthetic_trace,
    load_repository,
    load_workload,
    save_repository,
    save_workload,
)
from .simulator import STRATEGIES, SimConfig, compare, run, timing_table, write_comparison, write_result

log = logging.getLogger("datesso")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

OUT_ENV = "DATESSO_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on. Paths are optional; missing inputs are synthesized."""

    repository: str | None = None
    workload: str | None = None
    abstract_services: int = 10
    candidates: int = 10
    timesteps: int = 7200
    profile: dict = field(default_factory=dict)
    strategies: list[str] = field(default_factory=lambda: ["datesso", "tlhca", "doa", "rbc"])
    CL_local: float = 0.09
    CL_global: float = 1.0
    CU_local: float = 0.8
    CU_global: float = 0.9
    C_com: float = 0.0025
    horizon_offset: int = 5
    train_fraction: float = 2 / 3
    p_max: int = 2
    q_max: int = 2
    refit_every: int = 600
    rbc_k: int = 3
    rbc_window: int = 600
    seed: int = 0
    out: str = "results"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: top level must be an object")
        return cls.from_dict(data)

    def check(self) -> None:
        for name in ("repository", "workload"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} file not found: {path}")
        if self.horizon_offset < 1:
            raise ConfigError("horizon_offset must be >= 1")
        if self.abstract_services < 1 or self.candidates < 1 or self.timesteps < 1:
            raise ConfigError("abstract_services, candidates and timesteps must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.refit_every < 1 or self.rbc_window < 1 or self.rbc_k < 1:
            raise ConfigError("refit_every, rbc_window and rbc_k must be >= 1")
        if self.p_max < 0 or self.q_max < 0:
            raise ConfigError("p_max and q_max must be >= 0")
        bad = [s for s in self.strategies if s.lower() not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies {bad}; choose from {sorted(STRATEGIES)}")
        names = {f.name for f in fields(BurstProfile)}
        extra = sorted(set(self.profile) - names)
        if extra:
            raise ConfigError(f"unknown profile keys: {', '.join(extra)}")

    def sla(self, n: int) -> SlaConstraints:
        try:
            return SlaConstraints.uniform(
                n, self.CL_local, self.CU_local, self.CL_global, self.CU_global, self.C_com
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def sim_config(self) -> SimConfig:
        return SimConfig(
            horizon=self.horizon_offset,
            train_fraction=self.train_fraction,
            p_max=self.p_max,
            q_max=self.q_max,
            refit_every=self.refit_every,
            rbc_k=self.rbc_k,
            rbc_window=self.rbc_window,
            seed=self.seed,
        )

    def inputs(self) -> tuple[ServiceRepository, WorkloadTrace, SlaConstraints]:
        """Load or synthesize the repository and workload trace."""
        try:
            repo = load_repository(self.repository) if self.repository else None
            trace = load_workload(self.workload) if self.workload else None
        except (IngestionError, OSError) as exc:
            raise ConfigError(str(exc)) from None
        if trace is None:
            n = repo.abstract_count if repo is not None else self.abstract_services
            trace = generate_synthetic_trace(self.seed, self.timesteps, n, BurstProfile(**self.profile))
        sla = self.sla(trace.abstract_count)
        if repo is None:
            repo = generate_synthetic_repository(self.seed, trace, self.candidates, sla)
        if repo.abstract_count != trace.abstract_count:
            raise ConfigError(
                f"repository has {repo.abstract_count} abstract services, "
                f"workload has {trace.abstract_count}"
            )
        return repo, trace, sla


def _out_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get(OUT_ENV) or cfg.out)


def _print_timings(results) -> None:
    for name, row in timing_table(results).items():
        print(
            f"{name:8s} invocations={row['invocations']:5d} "
            f"median={row['median_s'] * 1e3:.3f}ms p95={row['p95_s'] * 1e3:.3f}ms",
            file=sys.stderr,
        )


def cmd_simulate(cfg: RunConfig, timings: bool = False) -> int:
    if len(cfg.strategies) != 1:
        raise ConfigError("simulate runs exactly one strategy; use compare for several")
    repo, trace, sla = cfg.inputs()
    result = run(cfg.strategies[0], repo, trace, sla, cfg.sim_config())
    path = write_result(result, _out_dir(cfg))
    s = result.summary()
    print(f"{s['strategy']}: debt={s['final_debt']:.3f} violations={s['violations']} "
          f"adaptations={s['adaptations']} -> {path}")
    if timings:
        _print_timings({result.strategy: result})
    return EXIT_OK


def cmd_compare(cfg: RunConfig, timings: bool = False) -> int:
    if len(cfg.strategies) < 2:
        raise ConfigError("compare needs at least two strategies")
    repo, trace, sla = cfg.inputs()
    report = compare(cfg.strategies, repo, trace, sla, cfg.sim_config())
    path = write_comparison(report, _out_dir(cfg))
    for name, r in report.results.items():
        score = report.scores[name]
        shown = "n/a" if score is None else f"{score:.4f}"
        print(f"{name:8s} debt={r.final_debt:10.3f} violations={r.violations:6d} score={shown}")
    print(f"-> {path}")
    if timings:
        _print_timings(report.results)
    return EXIT_OK


def cmd_forecast_eval(cfg: RunConfig, timings: bool = False) -> int:
    from .forecast import evaluate

    _, trace, _ = cfg.inputs()
    train_end = trace.split(cfg.train_fraction)
    ev = evaluate(trace.demand, train_end, cfg.p_max, cfg.q_max, cfg.refit_every)
    out = _out_dir(cfg) / "forecast"
    out.mkdir(parents=True, exist_ok=True)
    for x in range(trace.abstract_count):
        with (out / f"service_{x}.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("timestep", "actual", "predicted", "abs_error"))
            for t, a, p in zip(ev.origins, ev.actual[:, x], ev.predicted[:, x]):
                w.writerow((int(t), int(a), f"{p:.6f}", f"{abs(p - a):.6f}"))
    summary = {
        "train_rows": train_end,
        "test_rows": int(ev.origins.size),
        "orders": [list(o) for o in ev.orders],
        "rmse": ev.rmse(),
        "mae": ev.mae(),
        "naive_rmse": ev.naive_rmse(),
        "per_service": [
            {"rmse": ev.rmse(x), "mae": ev.mae(x), "naive_rmse": ev.naive_rmse(x)}
            for x in range(trace.abstract_count)
        ],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"rmse={summary['rmse']:.3f} mae={summary['mae']:.3f} naive_rmse={summary['naive_rmse']:.3f} -> {out}")
    return EXIT_OK


def cmd_gen_trace(cfg: RunConfig, timings: bool = False) -> int:
    repo, trace, _ = cfg.inputs()
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_workload(trace, out / "workload.csv")
    save_repository(repo, out / "repository.csv")
    (out / "config.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n", encoding="utf-8")
    print(f"{trace.horizon} x {trace.abstract_count} workload, {len(repo)} candidates -> {out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "forecast-eval": cmd_forecast_eval,
    "gen-trace": cmd_gen_trace,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="datesso", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--out", metavar="DIR", help=f"output directory (${OUT_ENV} takes precedence)")
        p.add_argument("--timesteps", type=int, help="synthetic trace length")
        if name == "simulate":
            p.add_argument("--strategy", help="one of " + ", ".join(STRATEGIES))
        if name == "compare":
            p.add_argument("--strategies", help="comma-separated list, e.g. datesso,doa")
        if name in ("simulate", "compare"):
            p.add_argument("--timings", action="store_true",
                           help="print reasoning-time statistics to stderr (not written to files)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.timesteps is not None:
        cfg.timesteps = args.timesteps
    if args.command == "simulate":
        if getattr(args, "strategy", None):
            cfg.strategies = [args.strategy]
        elif cfg.strategies == RunConfig().strategies:
            # the list was never chosen, so it is the compare default
            cfg.strategies = ["datesso"]
    if getattr(args, "strategies", None):
        cfg.strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    cfg.check()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, getattr(args, "timings", False))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        if args.verbose:
            log.exception("run failed")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
