import json
from pathlib import Path

import numpy as np
import pytest

from dephase.experiments.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


SMALL_MASTER = """
kind = "master"
seed = 99

[system]
type = "degenerate"
states = 6
energy = 1.0
coupling = 0.05
window_dt = 0.5

[evolution]
horizon_gaps = 5.0
points = 12
"""

ZERO_COUPLING_MASTER = """
kind = "master"
seed = 1

[system]
type = "explicit"
energies = [0.0, 1.0, 2.0]
interaction_real = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
window_dt = 1.0

[evolution]
horizon = 4.0
points = 5
"""

SMALL_SCRAMBLE = """
kind = "scramble-compare"
seed = 5

[system]
type = "degenerate"
states = 6
energy = 1.0
coupling = 0.04
window_dt = 0.5

[scramble]
samples = 2000
horizon_gaps = 1.0
compare_points = 10
"""

SMALL_KINETICS = """
kind = "kinetics"
seed = 3

[kinetics]
horizon = 1.0
points = 6

[[kinetics.modes]]
statistics = "fermion"
energy = 0.0

[[kinetics.modes]]
statistics = "fermion"
energy = 1.0

[[kinetics.modes]]
statistics = "boson"
energy = 1.0
n_max = 30

[[kinetics.processes]]
kind = "fermion-boson"
modes = [0, 1, 2]
rate = 1.0

[[kinetics.marginals]]
kind = "explicit"
values = [0.8, 0.2]

[[kinetics.marginals]]
kind = "explicit"
values = [0.5, 0.5]

[[kinetics.marginals]]
kind = "geometric"
ratio = 0.25
"""


def test_version_command(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == "0.1.0"


def test_validate_accepts_good_config(tmp_path):
    cfg = write(tmp_path, "ok.toml", SMALL_MASTER)
    assert main(["validate", "--config", str(cfg), "--quiet"]) == 0


def test_validate_rejects_negative_dt(tmp_path, capsys):
    bad = SMALL_MASTER.replace("window_dt = 0.5", "window_dt = -0.5")
    cfg = write(tmp_path, "bad.toml", bad)
    assert main(["validate", "--config", str(cfg)]) == 1
    assert "window_dt" in capsys.readouterr().err


def test_run_rejects_malformed_config_without_output(tmp_path):
    bad = SMALL_MASTER.replace("window_dt = 0.5", "window_dt = -0.5")
    cfg = write(tmp_path, "bad.toml", bad)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 1
    assert not out.exists()


def test_run_requires_seed(tmp_path):
    cfg = write(tmp_path, "noseed.toml", SMALL_MASTER.replace("seed = 99", ""))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_master_with_zero_coupling_is_constant(tmp_path):
    cfg = write(tmp_path, "zero.toml", ZERO_COUPLING_MASTER)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    rows = (out / "trajectory.csv").read_text().strip().splitlines()[1:]
    values = {}
    for row in rows:
        t, state, p = row.split(",")
        values.setdefault(state, set()).add(p)
    for state, seen in values.items():
        assert len(seen) == 1  # constant trajectory per state


def test_scramble_compare_csv_schema(tmp_path):
    cfg = write(tmp_path, "scr.toml", SMALL_SCRAMBLE)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    lines = (out / "compare.csv").read_text().strip().splitlines()
    assert lines[0] == "t,state,p_master,p_scramble,stderr"
    summary = lines[-1].split(",")
    assert float(summary[0]) == -1.0 and int(summary[1]) == -1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["checks"][0]["name"] == "scramble_matches_master"
    assert manifest["summary"]["sup_deviation"] >= 0.0


def test_rerun_from_manifest_is_byte_identical(tmp_path):
    cfg = write(tmp_path, "kin.toml", SMALL_KINETICS)
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert main(["run", "--config", str(cfg), "--out", str(first), "--quiet"]) == 0
    assert main(["run", "--config", str(first / "manifest.json"),
                 "--out", str(second), "--quiet"]) == 0
    assert (first / "means.csv").read_bytes() == (second / "means.csv").read_bytes()


def test_seed_override_changes_results_and_is_echoed(tmp_path):
    cfg = write(tmp_path, "m.toml", SMALL_MASTER)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "--config", str(cfg), "--out", str(out_a), "--quiet"]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(out_b),
                 "--seed", "123", "--quiet"]) == 0
    manifest_b = json.loads((out_b / "manifest.json").read_text())
    assert manifest_b["scenario"]["seed"] == 123
    assert (out_a / "trajectory.csv").read_bytes() != \
        (out_b / "trajectory.csv").read_bytes()


def test_check_failure_exits_two(tmp_path):
    text = """
kind = "bistochastic"
seed = 1

[bistochastic]
sizes = [8]
count = 3
tolerance = 1e-16
"""
    cfg = write(tmp_path, "tight.toml", text)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert not manifest["checks"][0]["passed"]


def test_sweep_empty_values_exits_one(tmp_path):
    cfg = write(tmp_path, "m.toml", SMALL_MASTER)
    assert main(["sweep", "--config", str(cfg), "--param", "dt", "--values",
                 "--out", str(tmp_path / "out")]) == 1


def test_sweep_dt_emits_combined_csv(tmp_path):
    cfg = write(tmp_path, "m.toml", SMALL_MASTER.replace(
        "horizon_gaps = 5.0", "horizon = 30.0"))
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--param", "dt",
                 "--values", "0.25", "0.5", "1.0",
                 "--out", str(out), "--quiet"]) == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[0] == "sweep_value"
    assert "trajectory_deviation" in header
    assert len(lines) == 4
    assert (out / "dt_000" / "manifest.json").exists()


def test_sweep_n_max_shrinks_discrepancy(tmp_path):
    # loose consistency tolerance: the small-cap runs exist to expose the
    # truncation error, not to pass the tight check
    text = SMALL_KINETICS.replace("horizon = 1.0",
                                  "horizon = 1.0\ntolerance = 1e-3")
    cfg = write(tmp_path, "kin.toml", text)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(cfg), "--param", "n_max",
                 "--values", "6", "12", "--out", str(out), "--quiet"]) == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    idx = header.index("max_discrepancy")
    small = float(lines[1].split(",")[idx])
    large = float(lines[2].split(",")[idx])
    assert large < small


def test_env_var_sets_default_output_root(tmp_path, monkeypatch):
    cfg = write(tmp_path, "zero.toml", ZERO_COUPLING_MASTER)
    monkeypatch.setenv("DEPHASE_OUT_DIR", str(tmp_path / "root"))
    monkeypatch.chdir(tmp_path)
    assert main(["run", "--config", str(cfg), "--quiet"]) == 0
    assert (tmp_path / "root" / "zero" / "manifest.json").exists()


def test_shipped_configs_validate():
    for config in sorted(CONFIG_DIR.glob("*.toml")):
        assert main(["validate", "--config", str(config), "--quiet"]) == 0
