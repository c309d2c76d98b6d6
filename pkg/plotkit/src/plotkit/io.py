"""Read-only access to simulator run directories.

A valid run directory carries a manifest.json (written last by the
simulator, so its presence marks a complete run), a summary.json with
the config echo and per-frame moment series, frames.ndjson with the
full per-snapshot histograms, and, for slit runs, screen_hits.csv.
This package never writes into a run directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np


class RunDirError(ValueError):
    """Missing, incomplete, or incompatible run directory."""


@dataclass
class RunData:
    path: Path
    manifest: dict
    summary: dict

    @property
    def scenario(self) -> str:
        return self.summary["scenario"]

    @property
    def scenario_config(self) -> dict:
        return self.summary["config"]["scenario"]

    @property
    def frame_iterations(self) -> "list[int]":
        return self.summary["frames"]["iteration"]

    def frame_series(self, key: str) -> "list":
        return self.summary["frames"][key]

    @property
    def trajectory(self) -> Optional[dict]:
        return self.summary.get("trajectory")

    def frames(self) -> "list[dict]":
        path = self.path / "frames.ndjson"
        if not path.exists():
            raise RunDirError(f"{self.path} has no frames.ndjson")
        return [json.loads(line) for line in path.read_text().splitlines()]

    def screen_hits(self) -> np.ndarray:
        """(k, 3) array of particle index, y, z; empty for zero hits."""
        path = self.path / "screen_hits.csv"
        if not path.exists():
            raise RunDirError(f"{self.path} has no screen_hits.csv")
        rows = path.read_text().splitlines()[1:]
        if not rows:
            return np.empty((0, 3))
        return np.array([[float(v) for v in r.split(",")] for r in rows])


def load_run(run_dir: "str | Path") -> RunData:
    path = Path(run_dir)
    if not path.is_dir():
        raise RunDirError(f"run directory {path} does not exist")
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise RunDirError(
            f"{path} has no manifest.json: incomplete or not a run directory"
        )
    summary_path = path / "summary.json"
    if not summary_path.exists():
        raise RunDirError(f"{path} has no summary.json")
    return RunData(
        path=path,
        manifest=json.loads(manifest_path.read_text()),
        summary=json.loads(summary_path.read_text()),
    )


def hist_edges(h: dict) -> np.ndarray:
    return h["lo"] + (h["hi"] - h["lo"]) * np.arange(h["n_bins"] + 1) / h["n_bins"]


def hist_centers(h: dict) -> np.ndarray:
    e = hist_edges(h)
    return 0.5 * (e[:-1] + e[1:])
