"""Run configuration: strict YAML parsing, defaults, presets.

Unknown keys are rejected by name.  Defaults mirror the published
parameter choices: C = 1/3, nu = 1/2.1, omega = 1, divisor = 50,
mu_v = 0.1.  The eight built-in presets encode the five experiments at
publication resolution.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields as dc_fields
from typing import Any, Optional

import yaml

from .ensemble import (
    EnsembleSpec,
    FixedPoint,
    GaussianPosition,
    InitPolicy,
    RandomTimePhase,
)
from .maps import MapParams, StepMode
from .scenarios import (
    SCENARIO_KINDS,
    Annulus,
    BarrierScenario,
    Box,
    DoubleSlit,
    FreeSpace,
    ScenarioSpec,
)

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioSpec
    ensemble: EnsembleSpec
    formats: "tuple[str, ...]" = ("ndjson", "csv")
    emit_frames: bool = True
    workers: int = 1
    max_divergent_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not self.formats:
            raise ConfigError("at least one output format must be selected")
        for f in self.formats:
            if f not in ("ndjson", "csv"):
                raise ConfigError(f"unknown output format '{f}'")
        if self.workers < 1:
            raise ConfigError("run.workers must be >= 1")
        if not 0.0 <= self.max_divergent_fraction <= 1.0:
            raise ConfigError("run.max_divergent_fraction must be in [0, 1]")


# ---------------------------------------------------------------------------
# strict section readers
# ---------------------------------------------------------------------------


def _require_mapping(obj: Any, name: str) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return obj


def _reject_unknown(d: dict, allowed: "set[str]", section: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in section '{section}'")


def _num(d: dict, key: str, section: str, default=None, required=False) -> Optional[float]:
    if key not in d:
        if required:
            raise ConfigError(f"missing required key '{key}' in section '{section}'")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"key '{key}' in section '{section}' must be a number")
    return float(v)


def _int(d: dict, key: str, section: str, default=None, required=False) -> Optional[int]:
    if key not in d:
        if required:
            raise ConfigError(f"missing required key '{key}' in section '{section}'")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"key '{key}' in section '{section}' must be an integer")
    return v


def _bool(d: dict, key: str, section: str, default: bool) -> bool:
    if key not in d:
        return default
    v = d[key]
    if not isinstance(v, bool):
        raise ConfigError(f"key '{key}' in section '{section}' must be a boolean")
    return v


def _parse_scenario(d: dict) -> ScenarioSpec:
    d = _require_mapping(d, "scenario")
    if "kind" not in d:
        raise ConfigError("missing required key 'kind' in section 'scenario'")
    kind = d["kind"]
    if kind not in SCENARIO_KINDS:
        raise ConfigError(
            f"unknown scenario kind '{kind}' (expected one of "
            f"{sorted(SCENARIO_KINDS)})"
        )
    sec = f"scenario({kind})"
    if kind == "annulus":
        _reject_unknown(d, {"kind", "circumference"}, sec)
        return Annulus(circumference=_num(d, "circumference", sec, default=TWO_PI))
    if kind == "free_space":
        _reject_unknown(d, {"kind"}, sec)
        return FreeSpace()
    if kind == "double_slit":
        allowed = {
            "kind", "x_screen", "x_barrier", "slit_centers", "slit_width",
            "vx", "reinit_tau", "reinit_t", "y0", "z0", "barrier_enabled",
            "reinit_enabled", "screen_hist_halfrange", "screen_hist_bins",
            "frame_hist_halfrange", "frame_hist_bins",
        }
        _reject_unknown(d, allowed, sec)
        centers = d.get("slit_centers", (-25.0, 25.0))
        if not (
            isinstance(centers, (list, tuple))
            and len(centers) == 2
            and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in centers)
        ):
            raise ConfigError("'slit_centers' must be a pair of numbers")
        return DoubleSlit(
            x_screen=_num(d, "x_screen", sec, default=1000.0),
            x_barrier=_num(d, "x_barrier", sec, default=500.0),
            slit_centers=(float(centers[0]), float(centers[1])),
            slit_width=_num(d, "slit_width", sec, default=10.0),
            vx=_num(d, "vx", sec, default=1.0),
            reinit_tau=_num(d, "reinit_tau", sec, default=0.1),
            reinit_t=_num(d, "reinit_t", sec, default=0.0),
            y0=_num(d, "y0", sec, default=0.1),
            z0=_num(d, "z0", sec, default=0.1),
            barrier_enabled=_bool(d, "barrier_enabled", sec, True),
            reinit_enabled=_bool(d, "reinit_enabled", sec, True),
            screen_hist_halfrange=_num(d, "screen_hist_halfrange", sec, default=64.0),
            screen_hist_bins=_int(d, "screen_hist_bins", sec, default=81),
            frame_hist_halfrange=_num(d, "frame_hist_halfrange", sec, default=150.0),
            frame_hist_bins=_int(d, "frame_hist_bins", sec, default=301),
        )
    if kind == "barrier":
        _reject_unknown(
            d, {"kind", "x_barrier", "width", "height", "slowdown_inside"}, sec
        )
        return BarrierScenario(
            x_barrier=_num(d, "x_barrier", sec, default=3.0),
            width=_num(d, "width", sec, default=0.5),
            height=_num(d, "height", sec, default=0.5 * (0.1**2 + 0.032**2)),
            slowdown_inside=_bool(d, "slowdown_inside", sec, False),
        )
    _reject_unknown(d, {"kind", "x_min", "x_max"}, sec)
    return Box(
        x_min=_num(d, "x_min", sec, default=-5.0),
        x_max=_num(d, "x_max", sec, default=5.0),
    )


def _parse_params(d: dict) -> MapParams:
    d = _require_mapping(d, "params")
    sec = "params"
    _reject_unknown(d, {"C", "K", "omega", "nu", "vel_divisor", "mu_v"}, sec)
    return MapParams(
        C=_num(d, "C", sec, default=1.0 / 3.0),
        K=_num(d, "K", sec, required=True),
        omega=_num(d, "omega", sec, default=1.0),
        nu=_num(d, "nu", sec, default=1.0 / 2.1),
        vel_divisor=_num(d, "vel_divisor", sec, default=50.0),
        mu_v=_num(d, "mu_v", sec, default=0.1),
    )


def _parse_init(d: dict) -> InitPolicy:
    d = _require_mapping(d, "ensemble.init")
    sec = "ensemble.init"
    policy = d.get("policy", "random_phase")
    if policy == "fixed":
        _reject_unknown(d, {"policy", "tau0", "t0", "v0", "x0"}, sec)
        return FixedPoint(
            tau0=_num(d, "tau0", sec, required=True),
            t0=_num(d, "t0", sec, required=True),
            v0=_num(d, "v0", sec, required=True),
            x0=_num(d, "x0", sec, required=True),
        )
    if policy == "random_phase":
        _reject_unknown(d, {"policy", "x0", "v0"}, sec)
        return RandomTimePhase(
            x0=_num(d, "x0", sec, default=0.0),
            v0=_num(d, "v0", sec, default=0.0),
        )
    if policy == "gaussian":
        _reject_unknown(d, {"policy", "mu_x", "sigma_x", "v0"}, sec)
        return GaussianPosition(
            mu_x=_num(d, "mu_x", sec, default=0.0),
            sigma_x=_num(d, "sigma_x", sec, required=True),
            v0=_num(d, "v0", sec, default=0.0),
        )
    raise ConfigError(f"unknown init policy '{policy}'")


def _parse_ensemble(d: dict, params: MapParams) -> EnsembleSpec:
    d = _require_mapping(d, "ensemble")
    sec = "ensemble"
    allowed = {
        "n_particles", "n_iterations", "seed", "snapshot_every", "mode",
        "collect_series", "series_hist_stride", "init",
    }
    _reject_unknown(d, allowed, sec)
    mode = None
    if "mode" in d:
        raw = d["mode"]
        if raw not in ("raw", "scaled"):
            raise ConfigError("ensemble.mode must be 'raw' or 'scaled'")
        mode = StepMode(raw)
    try:
        return EnsembleSpec(
            n_particles=_int(d, "n_particles", sec, required=True),
            n_iterations=_int(d, "n_iterations", sec, default=1000),
            seed=_int(d, "seed", sec, default=1),
            init=_parse_init(d.get("init")),
            params=params,
            mode=mode,
            snapshot_every=_int(d, "snapshot_every", sec, default=10),
            collect_series=_bool(d, "collect_series", sec, False),
            series_hist_stride=_int(d, "series_hist_stride", sec, default=50),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config_dict(doc: dict) -> RunConfig:
    doc = _require_mapping(doc, "<root>")
    _reject_unknown(doc, {"scenario", "params", "ensemble", "output", "run"}, "<root>")
    if "scenario" not in doc:
        raise ConfigError("missing required section 'scenario'")
    if "params" not in doc:
        raise ConfigError("missing required section 'params'")
    if "ensemble" not in doc:
        raise ConfigError("missing required section 'ensemble'")
    try:
        scenario = _parse_scenario(doc["scenario"])
        params = _parse_params(doc["params"])
        ensemble = _parse_ensemble(doc["ensemble"], params)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _require_mapping(doc.get("output"), "output")
    _reject_unknown(out, {"formats", "emit_frames"}, "output")
    formats = out.get("formats", ["ndjson", "csv"])
    if not isinstance(formats, list) or not all(isinstance(f, str) for f in formats):
        raise ConfigError("output.formats must be a list of strings")
    run = _require_mapping(doc.get("run"), "run")
    _reject_unknown(run, {"workers", "max_divergent_fraction"}, "run")
    # resolve the step mode now: parsed configs are fully canonical
    from dataclasses import replace

    from .ensemble import resolved_mode

    try:
        ensemble = replace(ensemble, mode=resolved_mode(ensemble, scenario))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        scenario=scenario,
        ensemble=ensemble,
        formats=tuple(formats),
        emit_frames=_bool(out, "emit_frames", "output", True),
        workers=_int(run, "workers", "run", default=1),
        max_divergent_fraction=_num(run, "max_divergent_fraction", "run", default=0.0),
    )


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a YAML run configuration."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ConfigError(
                f"config parse error at line {mark.line + 1}, column "
                f"{mark.column + 1}: {getattr(exc, 'problem', exc)}"
            ) from exc
        raise ConfigError(f"config parse error: {exc}") from exc
    if doc is None:
        raise ConfigError("empty configuration")
    return parse_config_dict(doc)


# ---------------------------------------------------------------------------
# canonical form, serialisation, hashing
# ---------------------------------------------------------------------------


def _scenario_dict(s: ScenarioSpec) -> dict:
    d: dict = {"kind": s.kind}
    for f in dc_fields(s):
        v = getattr(s, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d


def _init_dict(init: InitPolicy) -> dict:
    d = {"policy": init.policy}
    for f in dc_fields(init):
        d[f.name] = getattr(init, f.name)
    return d


def config_to_dict(cfg: RunConfig) -> dict:
    """Fully-resolved configuration (all defaults applied)."""
    e = cfg.ensemble
    p = e.params
    return {
        "scenario": _scenario_dict(cfg.scenario),
        "params": {
            "C": p.C,
            "K": p.K,
            "omega": p.omega,
            "nu": p.nu,
            "vel_divisor": p.vel_divisor,
            "mu_v": p.mu_v,
        },
        "ensemble": {
            "n_particles": e.n_particles,
            "n_iterations": e.n_iterations,
            "seed": e.seed,
            "snapshot_every": e.snapshot_every,
            "mode": (e.mode or cfg.scenario.mode).value,
            "collect_series": e.collect_series,
            "series_hist_stride": e.series_hist_stride,
            "init": _init_dict(e.init),
        },
        "output": {
            "formats": list(cfg.formats),
            "emit_frames": cfg.emit_frames,
        },
        "run": {
            "workers": cfg.workers,
            "max_divergent_fraction": cfg.max_divergent_fraction,
        },
    }


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def config_hash(cfg: RunConfig) -> str:
    """Stable digest of the canonicalized config (worker count excluded:
    it never changes the outputs)."""
    d = config_to_dict(cfg)
    d["run"] = {k: v for k, v in d["run"].items() if k != "workers"}
    return hashlib.sha256(
        json.dumps(d, sort_keys=True).encode("utf-8")
    ).hexdigest()


# ---------------------------------------------------------------------------
# presets: the five experiments at publication resolution
# ---------------------------------------------------------------------------


def _fig5(k: float) -> dict:
    return {
        "scenario": {"kind": "box", "x_min": -5.0, "x_max": 5.0},
        "params": {"K": k, "omega": 1.0},
        "ensemble": {
            "n_particles": 100_000,
            "n_iterations": 700,
            "seed": 1,
            "snapshot_every": 5,
            "init": {"policy": "gaussian", "mu_x": 0.0, "sigma_x": 0.119, "v0": 0.0},
        },
    }


# omega = 10 on the 2 pi ring puts ten kick-field periods around the
# annulus; the single-period choice locks the velocity to the ring
# position and loses both the published sigma_v and the flat occupancy
PRESET_DOCS: "dict[str, dict]" = {
    "fig1": {
        "scenario": {"kind": "annulus", "circumference": TWO_PI},
        "params": {"K": 95.0 / TWO_PI, "omega": 10.0},
        "ensemble": {
            "n_particles": 1,
            "n_iterations": 1_000_000,
            "seed": 1,
            "snapshot_every": 100_000,
            "collect_series": True,
            "series_hist_stride": 50,
            "init": {"policy": "fixed", "tau0": 0.1, "t0": 0.0, "v0": 0.0, "x0": 0.1},
        },
    },
    "fig2": {
        "scenario": {"kind": "free_space"},
        "params": {"K": 10.0, "omega": 1.0},
        "ensemble": {
            "n_particles": 100_000,
            "n_iterations": 220,
            "seed": 1,
            "snapshot_every": 5,
            "init": {"policy": "gaussian", "mu_x": 0.0, "sigma_x": 0.119, "v0": 0.0},
        },
    },
    "fig3": {
        "scenario": {"kind": "double_slit"},
        "params": {"K": 10.0, "omega": 1.0},
        "ensemble": {
            "n_particles": 10_000,
            "n_iterations": 1100,
            "seed": 1,
            "snapshot_every": 10,
            "init": {"policy": "random_phase", "x0": 0.0, "v0": 0.0},
        },
    },
    "fig4": {
        "scenario": {
            "kind": "barrier",
            "x_barrier": 3.0,
            "width": 0.5,
            "height": 0.005512,
        },
        "params": {"K": 10.0, "omega": 1.0},
        "ensemble": {
            "n_particles": 100_000,
            "n_iterations": 150,
            "seed": 1,
            "snapshot_every": 5,
            "init": {"policy": "gaussian", "mu_x": 0.0, "sigma_x": 0.119, "v0": 0.0},
        },
    },
    "fig5-k0": _fig5(0.0),
    "fig5-k10": _fig5(10.0),
    "fig5-k100": _fig5(100.0),
    "fig5-k1000": _fig5(1000.0),
}

PRESET_NAMES = tuple(PRESET_DOCS)


def load_preset(name: str) -> RunConfig:
    if name not in PRESET_DOCS:
        raise ConfigError(
            f"unknown preset '{name}' (available: {', '.join(PRESET_NAMES)})"
        )
    return parse_config_dict(json.loads(json.dumps(PRESET_DOCS[name])))
