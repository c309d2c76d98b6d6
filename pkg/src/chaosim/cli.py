"""Command-line entry point.

    chaosim run <config.yaml | preset> --out DIR [overrides]
    chaosim validate <config.yaml>
    chaosim presets

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numeric
divergence beyond the configured threshold.

A run directory holds frames.ndjson, frames.csv, screen_hits.csv (slit
runs), summary.json and, written last and atomically, manifest.json: a
directory without a manifest is an incomplete run.  Data files are
byte-reproducible for identical configurations; only the manifest
carries timing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional

from . import __version__
from .config import (
    ConfigError,
    PRESET_NAMES,
    RunConfig,
    config_hash,
    config_to_dict,
    load_preset,
    parse_config,
)
from .ensemble import EnsembleResult, run_ensemble
from .histogram import Histogram
from .stats import Moments

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_DIVERGENCE = 3


def _fmt(v: float) -> str:
    """Shortest round-trip decimal for a double."""
    return repr(float(v))


def _json_ready(obj):
    if isinstance(obj, Histogram):
        return obj.to_dict()
    if isinstance(obj, Moments):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    return obj


def _frame_record(frame) -> dict:
    return _json_ready(
        {
            "iteration": frame.iteration,
            "n_active": frame.n_active,
            "n_divergent": frame.n_divergent,
            "x_hist": frame.x_hist,
            "v_hist": frame.v_hist,
            "moments_x": frame.moments_x,
            "moments_v": frame.moments_v,
            "extras": frame.extras,
        }
    )


def write_frames_ndjson(path: Path, result: EnsembleResult) -> None:
    with open(path, "w") as fh:
        for frame in result.frames:
            fh.write(json.dumps(_frame_record(frame)) + "\n")


def _csv_hist_rows(fh, iteration: int, var: str, h: Histogram) -> None:
    edges = h.edges()
    for i, c in enumerate(h.counts):
        fh.write(
            f"{iteration},{var},{i},{_fmt(edges[i])},{_fmt(edges[i + 1])},{int(c)}\n"
        )


def write_frames_csv(path: Path, result: EnsembleResult) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,var,bin_index,bin_left,bin_right,count\n")
        for frame in result.frames:
            _csv_hist_rows(fh, frame.iteration, "x", frame.x_hist)
            _csv_hist_rows(fh, frame.iteration, "v", frame.v_hist)
            for var, key in (("y_fwd", "y_fwd_hist"), ("y_back", "y_back_hist")):
                h = frame.extras.get(key)
                if h is not None:
                    _csv_hist_rows(fh, frame.iteration, var, h)


def write_screen_hits(path: Path, result: EnsembleResult) -> None:
    with open(path, "w") as fh:
        fh.write("particle,y,z\n")
        for row in result.screen_hits:
            fh.write(f"{int(row[0])},{_fmt(row[1])},{_fmt(row[2])}\n")


def build_summary(cfg: RunConfig, result: EnsembleResult) -> dict:
    frames = result.frames
    series = {
        "iteration": [f.iteration for f in frames],
        "n_active": [f.n_active for f in frames],
        "mean_x": [f.moments_x.mean if f.moments_x else None for f in frames],
        "std_x": [f.moments_x.std if f.moments_x else None for f in frames],
        "mean_v": [f.moments_v.mean if f.moments_v else None for f in frames],
        "std_v": [f.moments_v.std if f.moments_v else None for f in frames],
    }
    # the config echo excludes the worker count: it is execution
    # infrastructure (recorded in the manifest) and must not break the
    # byte-reproducibility of data files across worker counts
    config_echo = config_to_dict(cfg)
    config_echo["run"] = {
        k: v for k, v in config_echo["run"].items() if k != "workers"
    }
    summary: dict = {
        "scenario": result.scenario_kind,
        "config_hash": config_hash(cfg),
        "config": config_echo,
        "n_particles": result.n_particles,
        "n_iterations": result.n_iterations,
        "n_divergent": result.n_divergent,
        "frames": series,
    }
    if result.scenario_kind == "barrier":
        summary["barrier"] = {
            "transmitted_fraction": result.transmitted_fraction,
            "n_transmitted": [f.extras.get("n_transmitted") for f in frames],
            "mean_x_transmitted": [
                (f.extras.get("moments_x_transmitted").mean
                 if f.extras.get("moments_x_transmitted") else None)
                for f in frames
            ],
        }
    if result.slit_counts is not None:
        summary["slit"] = dict(result.slit_counts)
        summary["slit"]["frame_columns"] = {
            "iteration": [f.iteration for f in frames],
            "x_forward": [f.extras.get("x_forward") for f in frames],
            "x_back": [f.extras.get("x_back") for f in frames],
        }
    if result.trajectory is not None:
        t = result.trajectory
        summary["trajectory"] = _json_ready(
            {
                "velocity_moments": t.velocity_moments,
                "velocity_hist": t.velocity_hist,
                "occupancy_hist": t.occupancy_hist,
                "forcing_hist": t.forcing_hist,
                "forcing_moments": t.forcing_moments,
                "t_ks": {"statistic": t.t_ks_statistic, "pass": t.t_ks_pass},
                "stride": t.stride,
            }
        )
    return summary


def execute_run(cfg: RunConfig, out_dir: Path) -> "tuple[EnsembleResult, list[str]]":
    """Run the ensemble and write all data files; manifest comes last."""
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run_ensemble(cfg.ensemble, cfg.scenario, workers=cfg.workers)
    wall = time.perf_counter() - t0

    files: "list[str]" = []
    if cfg.emit_frames:
        if "ndjson" in cfg.formats:
            write_frames_ndjson(out_dir / "frames.ndjson", result)
            files.append("frames.ndjson")
        if "csv" in cfg.formats:
            write_frames_csv(out_dir / "frames.csv", result)
            files.append("frames.csv")
    if result.screen_hits is not None:
        write_screen_hits(out_dir / "screen_hits.csv", result)
        files.append("screen_hits.csv")
    summary = build_summary(cfg, result)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    files.append("summary.json")

    manifest = {
        "config_hash": config_hash(cfg),
        "version": __version__,
        "seed": cfg.ensemble.seed,
        "wall_time_s": wall,
        "files": files,
        "n_divergent": result.n_divergent,
    }
    tmp = out_dir / "manifest.json.tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, out_dir / "manifest.json")
    return result, files


def _load_config_arg(arg: str) -> RunConfig:
    if arg in PRESET_NAMES:
        return load_preset(arg)
    path = Path(arg)
    if not path.exists():
        raise ConfigError(
            f"'{arg}' is neither a preset ({', '.join(PRESET_NAMES)}) nor a file"
        )
    return parse_config(path.read_text())


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    from dataclasses import replace

    ens = cfg.ensemble
    if args.seed is not None:
        ens = replace(ens, seed=args.seed)
    if args.particles is not None:
        ens = replace(ens, n_particles=args.particles)
    if args.iterations is not None:
        ens = replace(ens, n_iterations=args.iterations)
    cfg = replace(cfg, ensemble=ens)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.formats is not None:
        cfg = replace(cfg, formats=tuple(args.formats.split(",")))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaosim",
        description="Deterministic chaotic-map particle ensemble simulator",
    )
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="execute a run configuration or preset")
    p_run.add_argument("config", help="path to a YAML config, or a preset name")
    p_run.add_argument("--out", default=None, help="output directory (default: ./runs/<name>)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--particles", type=int, default=None)
    p_run.add_argument("--iterations", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--formats", default=None, help="comma-separated: ndjson,csv")

    p_val = sub.add_parser("validate", help="parse and validate a config, run nothing")
    p_val.add_argument("config", help="path to a YAML config, or a preset name")

    sub.add_parser("presets", help="list built-in presets")
    return parser


def main(argv: Optional["list[str]"] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION

    if args.command == "presets":
        for name in PRESET_NAMES:
            print(name)
        return EXIT_OK

    if args.command == "validate":
        try:
            _load_config_arg(args.config)
        except ConfigError as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        except OSError as exc:
            print(f"i/o error: {exc}", file=sys.stderr)
            return EXIT_IO
        print("ok")
        return EXIT_OK

    # run
    try:
        cfg = _load_config_arg(args.config)
        cfg = _apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    name = args.config if args.config in PRESET_NAMES else Path(args.config).stem
    out_dir = Path(args.out) if args.out else Path("runs") / name
    try:
        result, files = execute_run(cfg, out_dir)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    frac = result.n_divergent / result.n_particles
    print(
        f"wrote {len(files) + 1} files to {out_dir} "
        f"({result.n_particles} particles, {result.n_iterations} iterations, "
        f"{result.n_divergent} divergent)"
    )
    if frac > cfg.max_divergent_fraction:
        print(
            f"numeric divergence {frac:.3g} exceeds threshold "
            f"{cfg.max_divergent_fraction:.3g}",
            file=sys.stderr,
        )
        return EXIT_DIVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
