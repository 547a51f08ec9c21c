import json
import subprocess
import sys

import numpy as np
import pytest

from datesso.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, OUT_ENV, RunConfig, main
from datesso.model import WorkloadTrace, save_workload

SMALL = {"abstract_services": 3, "candidates": 5, "timesteps": 600, "refit_every": 200}


def write_config(tmp_path, **overrides):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({**SMALL, "out": str(tmp_path / "out"), **overrides}))
    return str(path)


def read_tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(autouse=True)
def no_env_override(monkeypatch):
    monkeypatch.delenv(OUT_ENV, raising=False)


def test_simulate_smoke(tmp_path, capsys):
    assert main(["simulate", "--config", write_config(tmp_path)]) == EXIT_OK
    files = read_tree(tmp_path / "out")
    assert set(files) == {"datesso/timeseries.csv", "datesso/ledger.csv", "datesso/decisions.csv"}
    assert "datesso: debt=" in capsys.readouterr().out


def test_missing_repository_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, repository=str(tmp_path / "nope.csv"))
    assert main(["simulate", "--config", cfg]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    assert main(["simulate", "--config", write_config(tmp_path, horizon=3)]) == EXIT_CONFIG


def test_bad_horizon_offset(tmp_path):
    assert main(["simulate", "--config", write_config(tmp_path, horizon_offset=0)]) == EXIT_CONFIG


def test_simulate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--strategy", "datesso", "--seed", "7", "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--strategy", "datesso", "--seed", "7", "--out", str(b)]) == 0
    assert read_tree(a) == read_tree(b)


def test_simulate_rejects_several_strategies(tmp_path):
    cfg = write_config(tmp_path, strategies=["datesso", "doa"])
    assert main(["simulate", "--config", cfg]) == EXIT_CONFIG


def test_compare_needs_two(tmp_path):
    assert main(["compare", "--config", write_config(tmp_path), "--strategies", "datesso"]) == EXIT_CONFIG


def test_compare_unknown_strategy(tmp_path):
    assert main(["compare", "--config", write_config(tmp_path), "--strategies", "datesso,greedy"]) == EXIT_CONFIG


def test_compare_subset(tmp_path):
    assert main(["compare", "--config", write_config(tmp_path), "--strategies", "datesso,doa"]) == EXIT_OK
    data = json.loads((tmp_path / "out" / "comparison.json").read_text())
    assert data["strategies"] == ["datesso", "doa"]
    assert set(data["sustainability"]) == {"datesso", "doa"}
    assert {(t["a"], t["b"]) for t in data["pairwise_tests"]} == {("datesso", "doa")}


def test_compare_all_four(tmp_path, capsys):
    assert main(["compare", "--config", write_config(tmp_path), "--timings"]) == EXIT_OK
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == ["comparison.json", "datesso", "doa", "rbc", "tlhca"]
    assert "median=" in capsys.readouterr().err
    assert "median" not in (out / "comparison.json").read_text()


def test_env_overrides_out(tmp_path, monkeypatch):
    target = tmp_path / "env"
    monkeypatch.setenv(OUT_ENV, str(target))
    assert main(["simulate", "--config", write_config(tmp_path), "--out", str(tmp_path / "flag")]) == 0
    assert (target / "datesso" / "timeseries.csv").exists()
    assert not (tmp_path / "flag").exists()


def test_constant_trace_is_runtime_error(tmp_path, capsys):
    wl = tmp_path / "flat.csv"
    save_workload(WorkloadTrace(np.full((300, 3), 40, dtype=np.int64)), wl)
    cfg = write_config(tmp_path, workload=str(wl))
    assert main(["forecast-eval", "--config", cfg]) == EXIT_RUNTIME
    assert "constant" in capsys.readouterr().err


def test_forecast_eval_long_memory(tmp_path):
    profile = {"burst_rate": 0.0, "diurnal_amplitude": 0.0, "memory_d": 0.35}
    cfg = write_config(tmp_path, timesteps=3000, abstract_services=2, refit_every=600, profile=profile)
    assert main(["forecast-eval", "--config", cfg]) == EXIT_OK
    summary = json.loads((tmp_path / "out" / "forecast" / "summary.json").read_text())
    assert np.isfinite(summary["rmse"])
    assert summary["rmse"] <= summary["naive_rmse"]
    assert summary["train_rows"] == 2000
    header = (tmp_path / "out" / "forecast" / "service_0.csv").read_text().splitlines()[0]
    assert header == "timestep,actual,predicted,abs_error"


@pytest.mark.parametrize("T", [600, 601, 1000])
def test_forecast_eval_split(tmp_path, T):
    assert main(["forecast-eval", "--config", write_config(tmp_path), "--timesteps", str(T)]) == EXIT_OK
    summary = json.loads((tmp_path / "out" / "forecast" / "summary.json").read_text())
    assert summary["train_rows"] == int(np.floor(2 / 3 * T))
    assert summary["test_rows"] == T - summary["train_rows"]


def test_gen_trace_round_trip(tmp_path):
    gen = tmp_path / "gen"
    assert main(["gen-trace", "--config", write_config(tmp_path), "--out", str(gen)]) == EXIT_OK
    assert {p.name for p in gen.iterdir()} == {"workload.csv", "repository.csv", "config.json"}
    saved = RunConfig.load(gen / "config.json")
    assert saved.timesteps == 600
    # replaying from the generated files matches the synthetic run
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", write_config(tmp_path), "--out", str(a)]) == 0
    files = write_config(tmp_path, workload=str(gen / "workload.csv"), repository=str(gen / "repository.csv"))
    assert main(["simulate", "--config", files, "--out", str(b)]) == 0
    assert read_tree(a) == read_tree(b)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "datesso", "compare", "--strategies", "datesso"],
        capture_output=True, text=True, cwd=tmp_path,
    )
    assert proc.returncode == EXIT_CONFIG
    assert "at least two" in proc.stderr
