"""Tests for the command-line entry point."""

import math
from pathlib import Path

import pytest

import clustergas
from clustergas.task.cli import COMMANDS, build_parser, main

SMALL = ["epsilon=0.05", "horizon=0.1", "compare_times=[0.05,0.1]", "engine.sampler_mode=sequential"]


@pytest.fixture(autouse=True)
def single_worker(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(clustergas.WORKERS_ENV, raising=False)


def run(command: str, out: Path, *args: str) -> int:
    return main([command, "--out", str(out), "--seed", "11", *args, *SMALL, "output.timestamp=false"])


def test_parser_lists_commands() -> None:
    parser = build_parser()
    assert set(COMMANDS) == {"simulate", "clusters", "expansion", "dsmc", "coagulate", "compare", "validate"}
    args = parser.parse_args(["validate", "--full", "dsmc.m=10"])
    assert args.full
    assert args.overrides == ["dsmc.m=10"]


def test_simulate(tmp_path: Path) -> None:
    assert run("simulate", tmp_path, "--runs", "3", "--dump-trajectories") == 0
    for name in ("config.yaml", "runs.csv", "collisions.csv", "clusters.csv", "trajectories_000000.csv"):
        assert (tmp_path / name).exists(), name
    header, rows = clustergas.read_table(tmp_path / "runs.csv")
    assert header["seed"] == "11"
    assert header["command"] == "simulate"
    assert "wall_clock" not in header
    assert [r["run_id"] for r in rows] == ["0", "1", "2"]
    cfg = clustergas.load_config(tmp_path / "config.yaml")
    assert header["config_hash"] == clustergas.config_hash(cfg)


def test_collision_table(tmp_path: Path) -> None:
    assert run("simulate", tmp_path, "--runs", "3") == 0
    with open(tmp_path / "collisions.csv", "r", encoding="utf-8") as f:
        columns = next(line for line in f if not line.startswith("#")).strip().split(",")
    assert columns == ["run_id", "t", "i", "j", "omega0", "omega1"]
    _, rows = clustergas.read_table(tmp_path / "collisions.csv")
    _, runs = clustergas.read_table(tmp_path / "runs.csv")
    assert len(rows) == sum(int(r["collisions"]) for r in runs)
    for row in rows:
        assert row["i"] != row["j"]
        assert math.hypot(float(row["omega0"]), float(row["omega1"])) == pytest.approx(1.0, abs=1e-12)


def test_simulate_is_byte_identical(tmp_path: Path) -> None:
    assert run("simulate", tmp_path, "--runs", "2") == 0
    first = {name: (tmp_path / name).read_bytes() for name in ("runs.csv", "collisions.csv", "clusters.csv")}
    assert run("simulate", tmp_path, "--runs", "2") == 0
    assert first == {name: (tmp_path / name).read_bytes() for name in first}


def test_jsonl_output(tmp_path: Path) -> None:
    assert run("simulate", tmp_path, "--runs", "1", "--format", "jsonl") == 0
    assert (tmp_path / "runs.jsonl").exists()


def test_invalid_config_exits_with_two(tmp_path: Path) -> None:
    assert main(["simulate", "--out", str(tmp_path), "epsilon=0.9"]) == 2
    assert main(["simulate", "--out", str(tmp_path), "--runs", "0"]) == 2
    assert main(["dsmc", "--out", str(tmp_path), "not_a_key=1"]) == 2


def test_clusters_with_sweep(tmp_path: Path) -> None:
    assert run("clusters", tmp_path, "--runs", "2", "engine.sweep=[0.05,0.1]", "output.plots=true") == 0
    assert (tmp_path / "size_law.png").exists() and (tmp_path / "crossover.png").exists()
    _, rows = clustergas.read_table(tmp_path / "crossover.csv")
    assert [float(r["horizon"]) for r in rows] == [0.05, 0.1]
    _, metrics = clustergas.read_table(tmp_path / "crossover_metrics.csv")
    assert [r["metric"] for r in metrics] == ["largest_fraction_monotone", "largest_fraction_crossover"]
    assert metrics[0]["passed"] == "true"
    assert float(metrics[1]["threshold"]) == 0.5
    _, laws = clustergas.read_table(tmp_path / "size_law.csv")
    assert sum(float(r["particle_fraction"]) for r in laws) == pytest.approx(1.0)


@pytest.mark.parametrize("job", ["nu", "lambda", "cumulants"])
def test_expansion_jobs(job: str, tmp_path: Path) -> None:
    extra = [f"expansion.job={job}", "expansion.n=1", "expansion.n_samples=20", "expansion.u_grid=[-0.1,0.1]"]
    assert run("expansion", tmp_path, "--runs", "4", *extra) == 0
    _, rows = clustergas.read_table(tmp_path / f"expansion_{job}.csv")
    assert rows


def test_limit_models(tmp_path: Path) -> None:
    assert run("dsmc", tmp_path, "dsmc.m=500", "dsmc.cell_size=0.25") == 0
    _, moments = clustergas.read_table(tmp_path / "dsmc_moments.csv")
    assert float(moments[0]["t"]) == 0.0
    assert run("coagulate", tmp_path, "coagulation.m=500", "coagulation.cell_size=0.25") == 0
    _, rate = clustergas.read_table(tmp_path / "coagulation_rate.csv")
    assert float(rate[0]["window"]) == 0.02


@pytest.mark.slow
def test_validate(tmp_path: Path) -> None:
    assert run("validate", tmp_path) == 0
    _, rows = clustergas.read_table(tmp_path / "validate.csv")
    assert all(r["passed"] == "true" for r in rows)
