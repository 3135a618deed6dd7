"""Scenario configuration: TOML files, validation, and manifest round-trips.

One file describes one scenario.  The schema is nested key-value text (TOML);
a previously written manifest (JSON) can be loaded in place of a config, in
which case the resolved scenario embedded in it is re-run unchanged.  Every
numeric field is validated here, before any computation or output, and the
seed is always explicit.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ValidationError

SCENARIO_KINDS = (
    "bistochastic",
    "master",
    "scramble-compare",
    "kinetics",
    "commutativity",
    "timescale",
)


def load_config(path) -> dict:
    """Read a scenario from a TOML config or from the manifest of an earlier run."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    if path.suffix == ".json":
        with open(path, "rb") as handle:
            manifest = json.load(handle)
        if "scenario" not in manifest:
            raise ValidationError(f"manifest {path} carries no scenario section")
        return manifest["scenario"]
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config {path} is not valid TOML: {exc}") from None


def _require(cfg: dict, key: str, kind: str):
    if key not in cfg:
        raise ValidationError(f"{kind} scenario is missing required field {key!r}")
    return cfg[key]


def _positive(value, name: str) -> float:
    value = float(value)
    if not (value > 0.0):
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return value


def _positive_int(value, name: str) -> int:
    if int(value) != value or int(value) <= 0:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _system_section(cfg: dict) -> dict:
    system = dict(_require(cfg, "system", cfg.get("kind", "?")))
    source = system.setdefault("type", "degenerate")
    system.setdefault("hbar", 1.0)
    _positive(system["hbar"], "system.hbar")
    system["window_dt"] = _positive(
        _require(system, "window_dt", "system"), "system.window_dt"
    )
    if source == "degenerate":
        system["states"] = _positive_int(_require(system, "states", "system"),
                                         "system.states")
        system.setdefault("energy", 1.0)
        system["coupling"] = _positive(_require(system, "coupling", "system"),
                                       "system.coupling")
    elif source == "spread":
        system["states"] = _positive_int(_require(system, "states", "system"),
                                         "system.states")
        lo = float(_require(system, "energy_min", "system"))
        hi = float(_require(system, "energy_max", "system"))
        if not (hi > lo):
            raise ValidationError("system.energy_max must exceed system.energy_min")
        system["coupling"] = _positive(_require(system, "coupling", "system"),
                                       "system.coupling")
    elif source == "explicit":
        energies = np.asarray(_require(system, "energies", "system"), dtype=float)
        if energies.ndim != 1 or energies.size == 0:
            raise ValidationError("system.energies must be a nonempty list")
        re = np.asarray(_require(system, "interaction_real", "system"), dtype=float)
        im = np.asarray(system.get("interaction_imag", np.zeros_like(re)), dtype=float)
        if re.shape != (energies.size, energies.size) or im.shape != re.shape:
            raise ValidationError(
                "system.interaction_real/_imag must be square matrices matching "
                "the energies"
            )
        system["energies"] = energies.tolist()
        system["interaction_real"] = re.tolist()
        system["interaction_imag"] = im.tolist()
    else:
        raise ValidationError(f"unknown system.type {source!r}")
    return system


def _modes_section(cfg: dict, kind: str) -> list[dict]:
    modes = _require(cfg, "modes", kind)
    if not isinstance(modes, list) or not modes:
        raise ValidationError(f"{kind}.modes must be a nonempty list of tables")
    out = []
    for i, mode in enumerate(modes):
        mode = dict(mode)
        statistics = _require(mode, "statistics", f"{kind}.modes[{i}]")
        if statistics not in ("fermion", "boson"):
            raise ValidationError(
                f"{kind}.modes[{i}].statistics must be fermion or boson"
            )
        mode["energy"] = float(_require(mode, "energy", f"{kind}.modes[{i}]"))
        if statistics == "boson":
            mode["n_max"] = _positive_int(
                _require(mode, "n_max", f"{kind}.modes[{i}]"),
                f"{kind}.modes[{i}].n_max",
            )
        else:
            mode["n_max"] = 1
        out.append(mode)
    return out


def _processes_section(cfg: dict, kind: str, n_modes: int) -> list[dict]:
    processes = _require(cfg, "processes", kind)
    if not isinstance(processes, list) or not processes:
        raise ValidationError(f"{kind}.processes must be a nonempty list of tables")
    out = []
    for i, process in enumerate(processes):
        process = dict(process)
        process_kind = _require(process, "kind", f"{kind}.processes[{i}]")
        modes = _require(process, "modes", f"{kind}.processes[{i}]")
        if len(modes) != 3 or any(not (0 <= int(m) < n_modes) for m in modes):
            raise ValidationError(
                f"{kind}.processes[{i}].modes must list three valid mode indices"
            )
        process["modes"] = [int(m) for m in modes]
        process["kind"] = str(process_kind)
        rate = float(_require(process, "rate", f"{kind}.processes[{i}]"))
        if rate < 0.0:
            raise ValidationError(f"{kind}.processes[{i}].rate must be nonnegative")
        process["rate"] = rate
        out.append(process)
    return out


def _marginal_section(marginal, mode: dict, label: str) -> dict:
    marginal = dict(marginal)
    mkind = marginal.setdefault("kind", "explicit")
    size = mode["n_max"] + 1
    if mkind == "explicit":
        values = np.asarray(_require(marginal, "values", label), dtype=float)
        if values.shape != (size,):
            raise ValidationError(f"{label}.values must have length {size}")
        if np.any(values < 0) or abs(values.sum() - 1.0) > 1e-12:
            raise ValidationError(f"{label}.values must be a probability vector")
        marginal["values"] = values.tolist()
    elif mkind == "delta":
        n = int(_require(marginal, "value", label))
        if not (0 <= n <= mode["n_max"]):
            raise ValidationError(f"{label}.value must lie within the mode cap")
        marginal["value"] = n
    elif mkind == "geometric":
        ratio = float(_require(marginal, "ratio", label))
        if not (0.0 <= ratio < 1.0):
            raise ValidationError(f"{label}.ratio must lie in [0, 1)")
    elif mkind == "thermal":
        _positive(_require(marginal, "temperature", label), f"{label}.temperature")
    else:
        raise ValidationError(f"{label}.kind {mkind!r} is not recognized")
    return marginal


def validate_config(cfg: dict) -> dict:
    """Check and normalize a scenario dict; returns the resolved copy.

    Fills in documented defaults so the resolved scenario is self-contained
    (a manifest echoing it re-runs identically).
    """
    cfg = dict(cfg)
    kind = cfg.get("kind")
    if kind not in SCENARIO_KINDS:
        raise ValidationError(
            f"scenario kind must be one of {SCENARIO_KINDS}, got {kind!r}"
        )
    if "seed" not in cfg:
        raise ValidationError("scenario must carry an explicit integer seed")
    if int(cfg["seed"]) != cfg["seed"] or int(cfg["seed"]) < 0:
        raise ValidationError(f"seed must be a nonnegative integer, got {cfg['seed']!r}")
    cfg["seed"] = int(cfg["seed"])

    if kind == "bistochastic":
        section = dict(cfg.get("bistochastic", {}))
        sizes = section.setdefault("sizes", [2, 8, 64, 256])
        if not sizes:
            raise ValidationError("bistochastic.sizes must be nonempty")
        section["sizes"] = [_positive_int(n, "bistochastic.sizes[]") for n in sizes]
        section["count"] = _positive_int(section.setdefault("count", 50),
                                         "bistochastic.count")
        section["tolerance"] = _positive(section.setdefault("tolerance", 1e-10),
                                         "bistochastic.tolerance")
        cfg["bistochastic"] = section

    elif kind == "master":
        cfg["system"] = _system_section(cfg)
        evolution = dict(cfg.get("evolution", {}))
        has_abs = "horizon" in evolution
        has_rel = "horizon_gaps" in evolution
        if has_abs == has_rel:
            raise ValidationError(
                "evolution must set exactly one of horizon (absolute time) "
                "or horizon_gaps (multiples of 1/gap)"
            )
        key = "horizon" if has_abs else "horizon_gaps"
        evolution[key] = _positive(evolution[key], f"evolution.{key}")
        evolution["points"] = _positive_int(evolution.setdefault("points", 50),
                                            "evolution.points")
        method = evolution.setdefault("method", "expm")
        if method not in ("expm", "uniformization", "rk"):
            raise ValidationError(f"evolution.method {method!r} is not recognized")
        initial = evolution.setdefault("initial_state", 0)
        if int(initial) != initial or initial < 0:
            raise ValidationError(
                f"evolution.initial_state must be a nonnegative index, got {initial!r}"
            )
        evolution["initial_state"] = int(initial)
        cfg["evolution"] = evolution

    elif kind == "scramble-compare":
        cfg["system"] = _system_section(cfg)
        scramble = dict(cfg.get("scramble", {}))
        # the protocol's coherence window defaults to twice the rate window:
        # a rate matrix built with window_dt describes scrambling at period
        # 2 * window_dt (see README)
        scramble.setdefault("dt", 2.0 * cfg["system"]["window_dt"])
        scramble["dt"] = _positive(scramble["dt"], "scramble.dt")
        scramble["samples"] = _positive_int(scramble.setdefault("samples", 20000),
                                            "scramble.samples")
        scramble["horizon_gaps"] = _positive(
            scramble.setdefault("horizon_gaps", 3.0), "scramble.horizon_gaps"
        )
        scramble["compare_points"] = _positive_int(
            scramble.setdefault("compare_points", 60), "scramble.compare_points"
        )
        scramble["stderr_multiple"] = _positive(
            scramble.setdefault("stderr_multiple", 5.0), "scramble.stderr_multiple"
        )
        scramble["abs_tolerance"] = _positive(
            scramble.setdefault("abs_tolerance", 0.02), "scramble.abs_tolerance"
        )
        cfg["scramble"] = scramble

    elif kind == "kinetics":
        section = dict(_require(cfg, "kinetics", kind))
        section["modes"] = _modes_section(section, "kinetics")
        section["processes"] = _processes_section(
            section, "kinetics", len(section["modes"])
        )
        marginals = _require(section, "marginals", "kinetics")
        if len(marginals) != len(section["modes"]):
            raise ValidationError("kinetics.marginals needs one entry per mode")
        section["marginals"] = [
            _marginal_section(m, mode, f"kinetics.marginals[{i}]")
            for i, (m, mode) in enumerate(zip(marginals, section["modes"]))
        ]
        section["horizon"] = _positive(section.setdefault("horizon", 1.0),
                                       "kinetics.horizon")
        section["points"] = _positive_int(section.setdefault("points", 30),
                                          "kinetics.points")
        section["tolerance"] = _positive(section.setdefault("tolerance", 1e-8),
                                         "kinetics.tolerance")
        cfg["kinetics"] = section

    elif kind == "commutativity":
        section = dict(_require(cfg, "commutativity", kind))
        section["modes"] = _modes_section(section, "commutativity")
        section["processes"] = _processes_section(
            section, "commutativity", len(section["modes"])
        )
        anchor = _require(section, "anchor", "commutativity")
        if len(anchor) != len(section["modes"]):
            raise ValidationError("commutativity.anchor needs one entry per mode")
        section["anchor"] = [int(n) for n in anchor]
        caps = section.setdefault("n_max_values", [])
        section["n_max_values"] = [
            _positive_int(n, "commutativity.n_max_values[]") for n in caps
        ]
        section.setdefault("assert_monotone", bool(section["n_max_values"]))
        cfg["commutativity"] = section

    elif kind == "timescale":
        cfg["system"] = _system_section(cfg)
        section = dict(cfg.get("timescale", {}))
        section["margin"] = _positive(section.setdefault("margin", 10.0),
                                      "timescale.margin")
        section["chi_tolerance"] = _positive(
            section.setdefault("chi_tolerance", 1e-6), "timescale.chi_tolerance"
        )
        cfg["timescale"] = section

    return cfg
