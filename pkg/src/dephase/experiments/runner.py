"""Config-driven experiment execution: compute, check, persist.

Every run resolves its scenario, computes all tables in memory, and only then
writes the output directory: CSV tables plus a ``manifest.json`` carrying the
resolved scenario, library version, checks with measured residuals, and any
truncation or timescale bookkeeping.  Nothing is written when validation
fails, and files are placed with temp-then-rename so readers never observe a
partial file.  Exit codes: 0 success, 1 validation error, 2 a check exceeded
its tolerance, 3 numerical failure.
"""

from __future__ import annotations

import copy
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import NumericalError, ValidationError
from ..master_evolution import (
    SystemSpec,
    build_q_matrix,
    master_trajectory,
    phase_scramble_evolution,
    stationary_analysis,
)
from ..occupation_kinetics import (
    FockBasis,
    ModeSpec,
    ProcessSpec,
    build_kinetic_q,
    diagram_commutativity,
    geometric_marginal,
    product_state,
    thermal_marginal,
    verify_derivative_consistency,
)
from ..spectral_core import ProbabilityVector, random_unitary, shannon_entropy
from ..timescale_tools import (
    applicability_window,
    chi_bar_squared_integral,
    chi_squared_integral,
)
from .config import load_config, validate_config

SWEEP_PARAMETERS = ("dt", "coupling", "n_max", "samples")


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)  # name -> (columns, rows)
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


# ------------------------------------------------------------------ helpers

def _seeds(seed: int) -> tuple[np.random.Generator, int]:
    """Deterministic split of the scenario seed into system and Monte Carlo streams."""
    children = np.random.SeedSequence(seed).spawn(2)
    system_rng = np.random.default_rng(children[0])
    mc_seed = int(children[1].generate_state(1, dtype=np.uint64)[0])
    return system_rng, mc_seed


def _system_from_config(system: dict, rng: np.random.Generator) -> SystemSpec:
    from ..spectral_core import random_hermitian

    hbar = float(system["hbar"])
    dt = float(system["window_dt"])
    if system["type"] == "explicit":
        energies = np.asarray(system["energies"], dtype=float)
        interaction = np.asarray(system["interaction_real"], dtype=float) + 1j * (
            np.asarray(system["interaction_imag"], dtype=float)
        )
        return SystemSpec.create(energies, interaction, hbar=hbar, dt=dt)
    n = int(system["states"])
    if system["type"] == "degenerate":
        energies = np.full(n, float(system["energy"]))
    else:  # spread
        energies = np.linspace(
            float(system["energy_min"]), float(system["energy_max"]), n
        )
    interaction = random_hermitian(n, rng, scale=float(system["coupling"]))
    np.fill_diagonal(interaction, 0.0)
    return SystemSpec.create(energies, interaction, hbar=hbar, dt=dt)


def _modes_from_config(modes_cfg: list[dict]) -> list[ModeSpec]:
    return [
        ModeSpec(m["statistics"], float(m["energy"]), int(m["n_max"]))
        for m in modes_cfg
    ]


def _processes_from_config(processes_cfg: list[dict]) -> list[ProcessSpec]:
    return [
        ProcessSpec(p["kind"], tuple(p["modes"]), float(p["rate"]))
        for p in processes_cfg
    ]


def _marginal_values(marginal: dict, mode: ModeSpec) -> np.ndarray:
    if marginal["kind"] == "explicit":
        return np.asarray(marginal["values"], dtype=float)
    if marginal["kind"] == "delta":
        values = np.zeros(mode.n_max + 1)
        values[int(marginal["value"])] = 1.0
        return values
    if marginal["kind"] == "geometric":
        return geometric_marginal(float(marginal["ratio"]), mode.n_max)
    return thermal_marginal(mode.energy, float(marginal["temperature"]), mode.n_max)


def _require_ergodic(q, context: str):
    report = stationary_analysis(q)
    if not report.ergodic:
        raise ValidationError(
            f"{context}: transition graph splits into {report.n_components} "
            "components; a gap-relative horizon is undefined"
        )
    return report


# ------------------------------------------------------------------ scenarios

def _run_bistochastic(cfg: dict) -> RunResult:
    section = cfg["bistochastic"]
    rng, _ = _seeds(cfg["seed"])
    rows = []
    worst_sum = 0.0
    worst_entry = 0.0
    for size in section["sizes"]:
        for index in range(section["count"]):
            t = random_unitary(int(size), rng)
            m = np.abs(t.matrix) ** 2
            row_dev = float(np.abs(m.sum(axis=1) - 1.0).max())
            col_dev = float(np.abs(m.sum(axis=0) - 1.0).max())
            min_entry = float(m.min())
            worst_sum = max(worst_sum, row_dev, col_dev)
            worst_entry = min(worst_entry, min_entry)
            rows.append((int(size), index, row_dev, col_dev, min_entry))
    tolerance = section["tolerance"]
    checks = [
        Check("row_and_column_sums", worst_sum <= tolerance, worst_sum, tolerance),
        Check("entries_nonnegative", worst_entry >= 0.0, worst_entry, 0.0),
    ]
    return RunResult(
        tables={"sums": (("size", "sample", "max_row_dev", "max_col_dev",
                          "min_entry"), rows)},
        checks=checks,
        summary={"max_sum_deviation": worst_sum, "min_entry": worst_entry},
    )


def _run_master(cfg: dict) -> RunResult:
    rng, _ = _seeds(cfg["seed"])
    spec = _system_from_config(cfg["system"], rng)
    q = build_q_matrix(spec)
    evolution = cfg["evolution"]
    stationary = stationary_analysis(q)
    if "horizon" in evolution:
        horizon = float(evolution["horizon"])
    else:
        if not stationary.ergodic:
            raise ValidationError(
                "master scenario: transition graph is disconnected; "
                "a gap-relative horizon is undefined"
            )
        horizon = float(evolution["horizon_gaps"]) / stationary.gap
    times = np.linspace(0.0, horizon, int(evolution["points"]))
    initial = int(evolution["initial_state"])
    if initial >= spec.dim:
        raise ValidationError(
            f"evolution.initial_state {initial} exceeds the {spec.dim}-state system"
        )
    p0 = ProbabilityVector.delta(spec.dim, initial)
    trajectory = master_trajectory(q, p0, times, method=evolution["method"])

    rows = [
        (float(t), state, float(trajectory[i, state]))
        for i, t in enumerate(times)
        for state in range(spec.dim)
    ]
    entropies = np.array([shannon_entropy(row) for row in trajectory])
    entropy_drop = float(np.diff(entropies).min()) if entropies.size > 1 else 0.0
    conservation = float(np.abs(trajectory.sum(axis=1) - 1.0).max())
    checks = [
        Check("entropy_nondecreasing", entropy_drop >= -1e-12, entropy_drop, -1e-12),
        Check("probability_conserved", conservation <= 1e-12, conservation, 1e-12),
    ]
    summary = {
        "gap": stationary.gap if stationary.ergodic else None,
        "final_entropy": float(entropies[-1]),
        "final_uniform_deviation": float(
            np.abs(trajectory[-1] - 1.0 / spec.dim).max()
        ),
    }
    uniform_hits = np.nonzero(
        np.abs(trajectory - 1.0 / spec.dim).max(axis=1) < 1e-6
    )[0]
    summary["time_to_uniform"] = float(times[uniform_hits[0]]) if uniform_hits.size else -1.0
    return RunResult(
        tables={"trajectory": (("t", "state", "p"), rows)},
        checks=checks,
        summary=summary,
        extras={
            "timescale": _timescale_dict(spec),
            "ergodic": stationary.ergodic,
            "n_components": stationary.n_components,
        },
    )


def _run_scramble_compare(cfg: dict) -> RunResult:
    rng, mc_seed = _seeds(cfg["seed"])
    spec = _system_from_config(cfg["system"], rng)
    scramble = cfg["scramble"]
    q = build_q_matrix(spec)
    stationary = _require_ergodic(q, "scramble-compare scenario")
    dt = float(scramble["dt"])
    n_steps = max(1, int(round(scramble["horizon_gaps"] / stationary.gap / dt)))
    horizon = n_steps * dt
    p0 = ProbabilityVector.delta(spec.dim, 0)
    trajectory = phase_scramble_evolution(
        spec, p0, horizon, dt, samples=int(scramble["samples"]), seed=mc_seed
    )
    stride = max(1, n_steps // int(scramble["compare_points"]))
    picks = sorted(set(range(0, n_steps + 1, stride)) | {n_steps})
    times = trajectory.times[picks]
    exact = master_trajectory(q, p0, times)

    rows = []
    sup_dev = 0.0
    max_stderr = 0.0
    passed = True
    mult = float(scramble["stderr_multiple"])
    abs_tol = float(scramble["abs_tolerance"])
    for i, pick in enumerate(picks):
        dev = np.abs(trajectory.mean[pick] - exact[i])
        allowed = np.maximum(mult * trajectory.stderr[pick], abs_tol)
        passed &= bool(np.all(dev <= allowed))
        sup_dev = max(sup_dev, float(dev.max()))
        max_stderr = max(max_stderr, float(trajectory.stderr[pick].max()))
        for state in range(spec.dim):
            rows.append(
                (float(times[i]), state, float(exact[i, state]),
                 float(trajectory.mean[pick, state]),
                 float(trajectory.stderr[pick, state]))
            )
    # summary row: sup deviation against the ceiling it was held to
    rows.append((-1.0, -1, sup_dev, max(mult * max_stderr, abs_tol), max_stderr))
    checks = [
        Check("scramble_matches_master", passed, sup_dev,
              max(mult * max_stderr, abs_tol)),
    ]
    return RunResult(
        tables={"compare": (("t", "state", "p_master", "p_scramble", "stderr"),
                            rows)},
        checks=checks,
        summary={
            "sup_deviation": sup_dev,
            "max_stderr": max_stderr,
            "gap": stationary.gap,
            "steps": n_steps,
            "scramble_dt": dt,
        },
        extras={"timescale": _timescale_dict(spec)},
    )


def _run_kinetics(cfg: dict) -> RunResult:
    section = cfg["kinetics"]
    modes = _modes_from_config(section["modes"])
    basis = FockBasis(modes)
    processes = _processes_from_config(section["processes"])
    marginals = [
        _marginal_values(m, mode) for m, mode in zip(section["marginals"], modes)
    ]
    p0 = product_state(basis, marginals)
    consistency = verify_derivative_consistency(basis, processes, p0)
    assembly = build_kinetic_q(basis, processes)

    times = np.linspace(0.0, float(section["horizon"]), int(section["points"]))
    method = "expm" if not assembly.rates.is_sparse else "uniformization"
    trajectory = master_trajectory(assembly.rates, p0, times, method=method)
    table = basis.occupation_table()
    means = trajectory @ table  # (points, modes)
    rows = [
        (float(t), mode, float(means[i, mode]))
        for i, t in enumerate(times)
        for mode in range(basis.n_modes)
    ]
    tolerance = float(section["tolerance"])
    range_slack = 1e-10
    range_violation = 0.0
    for mode, spec in enumerate(modes):
        low = float(means[:, mode].min())
        range_violation = max(range_violation, -low)
        if spec.statistics == "fermion":
            range_violation = max(range_violation, float(means[:, mode].max()) - 1.0)
    checks = [
        Check("collision_integral_consistency",
              consistency.max_discrepancy <= tolerance,
              consistency.max_discrepancy, tolerance),
        Check("mean_occupations_in_range", range_violation <= range_slack,
              range_violation, range_slack),
    ]
    return RunResult(
        tables={"means": (("t", "mode", "mean"), rows)},
        checks=checks,
        summary={
            "max_discrepancy": consistency.max_discrepancy,
            "truncated_pairs": assembly.total_truncated,
            "max_marginal_tail": float(consistency.marginal_tail.max()),
        },
        extras={
            "consistency": {
                "exact": consistency.exact.tolist(),
                "collision": consistency.collision.tolist(),
                "marginal_tail": consistency.marginal_tail.tolist(),
            },
            "truncation": {
                "per_process": list(assembly.truncated_pairs),
                "total": assembly.total_truncated,
            },
        },
    )


def _run_commutativity(cfg: dict) -> RunResult:
    section = cfg["commutativity"]
    base_modes = section["modes"]
    processes = _processes_from_config(section["processes"])
    anchor = tuple(section["anchor"])
    caps = section["n_max_values"] or [None]

    gap_rows = []
    mean_rows = []
    gaps = []
    stationarity_worst = 0.0
    for cap in caps:
        modes_cfg = copy.deepcopy(base_modes)
        if cap is not None:
            for mode in modes_cfg:
                if mode["statistics"] == "boson":
                    mode["n_max"] = int(cap)
        modes = _modes_from_config(modes_cfg)
        basis = FockBasis(modes)
        report = diagram_commutativity(basis, processes, anchor)
        label = int(cap) if cap is not None else int(
            max(m.n_max for m in modes if m.statistics == "boson")
        )
        gaps.append(report.gap)
        stationarity_worst = max(stationarity_worst, report.stationarity_deviation)
        gap_rows.append(
            (label, report.gap, report.component_sizes[0],
             report.stationarity_deviation, report.shell_size)
        )
        for mode in range(basis.n_modes):
            mean_rows.append(
                (label, mode, float(report.means_master[mode]),
                 float(report.means_collision[mode]))
            )
    checks = [
        Check("master_reached_stationarity", stationarity_worst <= 1e-8,
              stationarity_worst, 1e-8),
    ]
    if section["assert_monotone"] and len(gaps) > 1:
        drops = np.diff(gaps)
        checks.append(
            Check("finite_size_gap_monotone_decreasing",
                  bool(np.all(drops < 0.0)), float(drops.max()), 0.0)
        )
    return RunResult(
        tables={
            "gaps": (("n_max", "gap", "component_size", "stationarity_deviation",
                      "shell_size"), gap_rows),
            "means": (("n_max", "mode", "mean_master", "mean_collision"), mean_rows),
        },
        checks=checks,
        summary={
            "final_gap": gaps[-1],
            "monotone": bool(np.all(np.diff(gaps) < 0.0)) if len(gaps) > 1 else True,
        },
    )


def _timescale_dict(spec: SystemSpec, margin: float = 10.0) -> dict:
    report = applicability_window(spec, margin=margin)
    return {
        "dt": report.dt,
        "t_fast": report.t_fast,
        "t_amplitude_coupling": report.t_amplitude_coupling,
        "t_amplitude_rate": report.t_amplitude_rate,
        "margin": report.margin,
        "admissible": report.admissible,
    }


def _run_timescale(cfg: dict) -> RunResult:
    rng, _ = _seeds(cfg["seed"])
    spec = _system_from_config(cfg["system"], rng)
    section = cfg["timescale"]
    report = applicability_window(spec, margin=float(section["margin"]))
    smooth = chi_squared_integral(spec.dt, spec.hbar)
    box = chi_bar_squared_integral(spec.dt, spec.hbar)
    expected = 2.0 * math.pi * spec.hbar / spec.dt
    residual = max(abs(smooth - expected), abs(smooth - box)) / expected
    tolerance = float(section["chi_tolerance"])
    rows = [(
        report.dt, spec.half_width, report.t_fast, report.t_amplitude_coupling,
        report.t_amplitude_rate, report.margin, int(report.admissible),
        smooth, box,
    )]
    return RunResult(
        tables={"window": (("dt", "half_width", "t_fast", "t_amplitude_coupling",
                            "t_amplitude_rate", "margin", "admissible",
                            "chi_sq_integral", "chi_bar_sq_integral"), rows)},
        checks=[Check("chi_normalization", residual <= tolerance, residual,
                      tolerance)],
        summary={"admissible": report.admissible, "chi_residual": residual},
        extras={"timescale": _timescale_dict(spec, margin=float(section["margin"]))},
    )


_SCENARIOS = {
    "bistochastic": _run_bistochastic,
    "master": _run_master,
    "scramble-compare": _run_scramble_compare,
    "kinetics": _run_kinetics,
    "commutativity": _run_commutativity,
    "timescale": _run_timescale,
}


# ------------------------------------------------------------------ output

def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".16e")


def _write_atomic(path: Path, payload: str):
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "w", encoding="utf-8", newline="") as handle:
        handle.write(payload)
    os.replace(tmp, path)


def _write_outputs(out_dir: Path, result: RunResult, scenario: dict,
                   wall_time: float, error: dict | None = None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    table_files = {}
    for name, (columns, rows) in result.tables.items():
        lines = [",".join(columns)]
        lines.extend(",".join(_format_cell(cell) for cell in row) for row in rows)
        filename = f"{name}.csv"
        _write_atomic(out_dir / filename, "\n".join(lines) + "\n")
        table_files[name] = filename
    manifest = {
        "scenario": scenario,
        "library_version": __version__,
        "wall_time_s": wall_time,
        "tables": table_files,
        "checks": [
            {"name": c.name, "passed": c.passed, "measured": c.measured,
             "tolerance": c.tolerance}
            for c in result.checks
        ],
        "summary": result.summary,
        "extras": result.extras,
        "error": error,
    }
    _write_atomic(out_dir / "manifest.json",
                  json.dumps(manifest, indent=2, sort_keys=False) + "\n")
    return manifest


def run_experiment(raw_config: dict, out_dir, seed_override: int | None = None,
                   quiet: bool = False) -> int:
    """Validate, compute, and persist one scenario; returns the exit code."""
    raw_config = copy.deepcopy(raw_config)
    if seed_override is not None:
        raw_config["seed"] = int(seed_override)
    scenario = validate_config(raw_config)  # ValidationError propagates: no files
    out_dir = Path(out_dir)
    started = time.perf_counter()
    try:
        result = _SCENARIOS[scenario["kind"]](scenario)
    except NumericalError as exc:
        _write_outputs(out_dir, RunResult(), scenario,
                       time.perf_counter() - started,
                       error={"code": "numerical", "message": str(exc)})
        if not quiet:
            print(f"numerical failure: {exc}")
        return 3
    manifest = _write_outputs(out_dir, result, scenario,
                              time.perf_counter() - started)
    failed = [c for c in result.checks if not c.passed]
    if not quiet:
        for check in result.checks:
            state = "ok" if check.passed else "FAILED"
            print(f"check {check.name}: {state} "
                  f"(measured {check.measured:.6e}, tolerance {check.tolerance:.6e})")
        print(f"wrote {len(manifest['tables'])} table(s) to {out_dir}")
    return 2 if failed else 0


def _apply_sweep_value(raw: dict, parameter: str, value) -> dict:
    cfg = copy.deepcopy(raw)
    if parameter == "dt":
        cfg.setdefault("system", {})["window_dt"] = float(value)
        # keep the protocol window paired with the rate window
        if "scramble" in cfg:
            cfg["scramble"].pop("dt", None)
    elif parameter == "coupling":
        cfg.setdefault("system", {})["coupling"] = float(value)
    elif parameter == "n_max":
        for section_name in ("kinetics", "commutativity"):
            section = cfg.get(section_name)
            if section:
                for mode in section.get("modes", []):
                    if mode.get("statistics") == "boson":
                        mode["n_max"] = int(value)
                if section_name == "commutativity":
                    section["n_max_values"] = []
    elif parameter == "samples":
        cfg.setdefault("scramble", {})["samples"] = int(value)
    else:
        raise ValidationError(
            f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}"
        )
    return cfg


def sweep_experiment(raw_config: dict, out_dir, parameter: str, values,
                     seed_override: int | None = None, quiet: bool = False) -> int:
    """Run the scenario once per value and emit a combined summary CSV."""
    values = list(values)
    if not values:
        raise ValidationError("sweep needs a nonempty list of values")
    if parameter not in SWEEP_PARAMETERS:
        raise ValidationError(
            f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}"
        )
    out_dir = Path(out_dir)
    summary_rows = []
    summary_columns = None
    reference_table = None
    worst = 0
    for index, value in enumerate(values):
        cfg = _apply_sweep_value(raw_config, parameter, value)
        if seed_override is not None:
            cfg["seed"] = int(seed_override)
        scenario = validate_config(cfg)
        sub_dir = out_dir / f"{parameter}_{index:03d}"
        started = time.perf_counter()
        try:
            result = _SCENARIOS[scenario["kind"]](scenario)
        except NumericalError as exc:
            _write_outputs(sub_dir, RunResult(), scenario,
                           time.perf_counter() - started,
                           error={"code": "numerical", "message": str(exc)})
            return 3
        _write_outputs(sub_dir, result, scenario, time.perf_counter() - started)
        worst = max(worst, 2 if any(not c.passed for c in result.checks) else 0)

        summary = dict(result.summary)
        # trajectory deviation against the first sweep point, when comparable
        main_table = next(iter(result.tables.values())) if result.tables else None
        if main_table is not None:
            data = np.array(
                [[float(x) for x in row] for row in main_table[1]], dtype=float
            )
            if reference_table is None:
                reference_table = data
                summary["trajectory_deviation"] = 0.0
            elif reference_table.shape == data.shape:
                summary["trajectory_deviation"] = float(
                    np.abs(data[:, -1] - reference_table[:, -1]).max()
                )
            else:
                summary["trajectory_deviation"] = math.nan
        if summary_columns is None:
            summary_columns = list(summary)
        summary_rows.append((float(value), summary))
        if not quiet:
            print(f"{parameter}={value}: " + ", ".join(
                f"{k}={v}" for k, v in summary.items()))
    columns = ["sweep_value"] + summary_columns
    lines = [",".join(columns)]
    for value, summary in summary_rows:
        cells = [_format_cell(value)]
        cells.extend(_format_cell(summary.get(c, math.nan)) for c in summary_columns)
        lines.append(",".join(cells))
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic(out_dir / "sweep.csv", "\n".join(lines) + "\n")
    return worst


def run_from_path(config_path, out_dir, seed_override=None, quiet=False) -> int:
    return run_experiment(load_config(config_path), out_dir,
                          seed_override=seed_override, quiet=quiet)
