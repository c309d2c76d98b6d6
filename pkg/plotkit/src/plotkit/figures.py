"""The seven figure types plus the two-run comparison.

Every number drawn comes from the run files; nothing is re-simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import RunData, RunDirError, hist_centers, hist_edges, load_run

FIGURE_KINDS = (
    "velocity-hist",
    "annulus-occupancy",
    "dispersion",
    "slit-heatmap",
    "screen-scatter",
    "tunneling-compare",
    "box-waterfall",
)

# scenarios each figure type can be drawn from
_COMPAT = {
    "velocity-hist": ("annulus", "free_space", "barrier", "box", "double_slit"),
    "annulus-occupancy": ("annulus",),
    "dispersion": ("free_space",),
    "slit-heatmap": ("double_slit",),
    "screen-scatter": ("double_slit",),
    "tunneling-compare": ("barrier",),
    "box-waterfall": ("box",),
}


@dataclass
class FigureRequest:
    run_dir: "str | Path"
    figure: str
    out_file: "str | Path"
    style: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.figure not in FIGURE_KINDS:
            raise RunDirError(
                f"unknown figure '{self.figure}' (choose from {', '.join(FIGURE_KINDS)})"
            )


def _check_compat(run: RunData, figure: str) -> None:
    allowed = _COMPAT[figure]
    if run.scenario not in allowed:
        raise RunDirError(
            f"figure '{figure}' needs a {' / '.join(allowed)} run, "
            f"got '{run.scenario}'"
        )


def _bar_from_hist(ax, h: dict, color="C0", label=None):
    edges = hist_edges(h)
    ax.stairs(h["counts"], edges, fill=True, color=color, alpha=0.75, label=label)


def _gaussian_overlay(ax, h: dict, mu: float, sigma: float, n: int):
    xs = np.linspace(h["lo"], h["hi"], 400)
    width = (h["hi"] - h["lo"]) / h["n_bins"]
    dens = n * width * np.exp(-0.5 * ((xs - mu) / sigma) ** 2) / (
        sigma * math.sqrt(2 * math.pi)
    )
    ax.plot(xs, dens, "k--", lw=1.5, label=f"Gaussian fit σ={sigma:.3f}")


def _render_velocity_hist(run: RunData, ax) -> None:
    traj = run.trajectory
    if traj is None:
        raise RunDirError(
            "run has no single-trajectory statistics (collect_series off)"
        )
    h = traj["velocity_hist"]
    m = traj["velocity_moments"]
    _bar_from_hist(ax, h, label="velocity samples")
    _gaussian_overlay(ax, h, m["mean"], m["std"], sum(h["counts"]))
    ax.set_xlabel("v")
    ax.set_ylabel("count")
    ax.set_title(f"Velocity histogram (σ={m['std']:.3f})")
    ax.legend()


def _render_annulus_occupancy(run: RunData, ax) -> None:
    traj = run.trajectory
    if traj is None or traj.get("occupancy_hist") is None:
        raise RunDirError("run has no occupancy histogram")
    h = traj["occupancy_hist"]
    _bar_from_hist(ax, h, color="C2")
    mean = np.mean(h["counts"])
    ax.axhline(mean, color="k", ls="--", lw=1, label="uniform level")
    ax.set_xlabel("ring position")
    ax.set_ylabel("visits")
    ax.set_title("Annulus occupancy")
    ax.legend()


def _render_dispersion(run: RunData, fig) -> None:
    frames = run.frames()
    ax1, ax2 = fig.subplots(2, 1)
    picks = [0, len(frames) // 3, 2 * len(frames) // 3, len(frames) - 1]
    for i in picks:
        f = frames[i]
        h = f["x_hist"]
        ax1.plot(hist_centers(h), h["counts"], label=f"iter {f['iteration']}")
    ax1.set_xlabel("x")
    ax1.set_ylabel("count")
    ax1.set_title("Packet dispersion")
    ax1.legend(fontsize=8)
    mean_x = np.array(run.frame_series("mean_x"), dtype=float)
    std_x = np.array(run.frame_series("std_x"), dtype=float)
    ax2.plot(mean_x, std_x, "o-", ms=3)
    ax2.set_xlabel("mean position")
    ax2.set_ylabel("σ_x")


def _render_slit_heatmap(run: RunData, ax, grid=(500, 200)) -> None:
    cfg = run.scenario_config
    frames = run.frames()
    nx, ny = grid
    x_max = cfg["x_screen"]
    half = cfg["frame_hist_halfrange"]
    img = np.zeros((ny, nx))

    def paint(x_col, h):
        if x_col is None or h is None:
            return
        col = int(np.clip(x_col / x_max * (nx - 1), 0, nx - 1))
        centers = hist_centers(h)
        rows = np.clip(
            ((centers + half) / (2 * half) * (ny - 1)).astype(int), 0, ny - 1
        )
        np.add.at(img[:, col], rows, np.asarray(h["counts"], dtype=float))

    for f in frames:
        ex = f["extras"]
        paint(ex.get("x_forward"), ex.get("y_fwd_hist"))
        paint(ex.get("x_back"), ex.get("y_back_hist"))
    ax.imshow(
        np.log1p(img),
        origin="lower",
        aspect="auto",
        extent=(0, x_max, -half, half),
        cmap="inferno",
    )
    # overlay the barrier with its slit openings
    xb = cfg["x_barrier"]
    w = cfg["slit_width"] / 2
    c1, c2 = cfg["slit_centers"]
    for lo, hi in ((-half, c1 - w), (c1 + w, c2 - w), (c2 + w, half)):
        ax.plot([xb, xb], [lo, hi], color="cyan", lw=2)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("Trajectory density")


def _render_screen_scatter(run: RunData, ax) -> None:
    hits = run.screen_hits()
    if hits.size:
        ax.scatter(hits[:, 1], hits[:, 2], s=2, alpha=0.5, color="C0")
    ax.set_xlabel("y")
    ax.set_ylabel("z")
    ax.set_title(f"Screen hits ({len(hits)})")


def _render_tunneling_compare(run: RunData, ax) -> None:
    cfg = run.scenario_config
    its = np.array(run.frame_iterations, dtype=float)
    mean_all = np.array(run.frame_series("mean_x"), dtype=float)
    barrier = run.summary.get("barrier")
    if barrier is None:
        raise RunDirError("run has no barrier block in summary.json")
    mean_tr = np.array(
        [math.nan if v is None else v for v in barrier["mean_x_transmitted"]]
    )
    ax.plot(its, mean_all, label="all particles")
    ax.plot(its, mean_tr, label="transmitted")
    ax.axhspan(
        cfg["x_barrier"], cfg["x_barrier"] + cfg["width"],
        color="gray", alpha=0.4, label="barrier",
    )
    frac = barrier["transmitted_fraction"]
    ax.set_title(f"Barrier traversal (transmitted fraction {frac:.2f})")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean position")
    ax.legend()


def _render_box_waterfall(run: RunData, ax) -> None:
    frames = run.frames()
    step = max(1, len(frames) // 40)
    picked = frames[::step]
    peak = max(max(f["x_hist"]["counts"]) for f in picked) or 1
    for j, f in enumerate(picked):
        h = f["x_hist"]
        base = j * 0.8
        ax.fill_between(
            hist_centers(h),
            base,
            base + np.asarray(h["counts"], dtype=float) / peak * 2.0,
            color=plt.cm.viridis(j / max(len(picked) - 1, 1)),
            alpha=0.85,
            lw=0,
        )
    ax.set_xlabel("x")
    ax.set_ylabel("time →")
    ax.set_yticks([])
    ax.set_title("Box histogram evolution")


def render(req: FigureRequest) -> Path:
    """Render one figure from a run directory; returns the output path."""
    run = load_run(req.run_dir)
    _check_compat(run, req.figure)
    fig = plt.figure(figsize=req.style.get("figsize", (8, 5)))
    try:
        if req.figure == "dispersion":
            _render_dispersion(run, fig)
        else:
            ax = fig.subplots()
            {
                "velocity-hist": _render_velocity_hist,
                "annulus-occupancy": _render_annulus_occupancy,
                "slit-heatmap": _render_slit_heatmap,
                "screen-scatter": _render_screen_scatter,
                "tunneling-compare": _render_tunneling_compare,
                "box-waterfall": _render_box_waterfall,
            }[req.figure](run, ax)
        fig.tight_layout()
        out = Path(req.out_file)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=req.style.get("dpi", 130))
    finally:
        plt.close(fig)
    return Path(req.out_file)


@dataclass
class CompareResult:
    out_file: Path
    overtake_iteration: Optional[int]


def compare(run_a: "str | Path", run_b: "str | Path", out_file: "str | Path") -> CompareResult:
    """Overlay the mean-position curves of two runs of equal cadence.

    When run A carries barrier statistics, the first common iteration at
    which the transmitted mean exceeds run B's mean is marked.
    """
    a = load_run(run_a)
    b = load_run(run_b)
    its_a = a.frame_iterations
    its_b = b.frame_iterations
    cad_a = np.diff(its_a[:2])[0] if len(its_a) > 1 else None
    cad_b = np.diff(its_b[:2])[0] if len(its_b) > 1 else None
    if cad_a != cad_b:
        raise RunDirError(
            f"snapshot cadence mismatch: {cad_a} vs {cad_b} iterations per frame"
        )
    mean_a = dict(zip(its_a, a.frame_series("mean_x")))
    mean_b = dict(zip(its_b, b.frame_series("mean_x")))
    common = sorted(set(its_a) & set(its_b))
    if not common:
        raise RunDirError("runs share no snapshot iterations")

    overtake = None
    trans_by_it = {}
    barrier = a.summary.get("barrier")
    if barrier is not None:
        trans_by_it = dict(zip(its_a, barrier["mean_x_transmitted"]))
        for it in common:
            tr = trans_by_it.get(it)
            if tr is not None and mean_b[it] is not None and tr > mean_b[it]:
                overtake = it
                break

    fig, ax = plt.subplots(figsize=(8, 5))
    try:
        ax.plot(its_a, a.frame_series("mean_x"), label=f"A: {a.scenario}")
        ax.plot(its_b, b.frame_series("mean_x"), "--", label=f"B: {b.scenario}")
        if barrier is not None:
            vals = [trans_by_it[i] for i in its_a]
            ax.plot(
                its_a,
                [math.nan if v is None else v for v in vals],
                ":",
                label="A transmitted",
            )
            cfg = a.scenario_config
            ax.axhspan(
                cfg["x_barrier"], cfg["x_barrier"] + cfg["width"],
                color="gray", alpha=0.4,
            )
        if overtake is not None:
            ax.axvline(overtake, color="red", lw=1)
            ax.annotate(
                f"overtake @ {overtake}",
                (overtake, mean_b[overtake]),
                textcoords="offset points",
                xytext=(6, 10),
                color="red",
                fontsize=9,
            )
        ax.set_xlabel("iteration")
        ax.set_ylabel("mean position")
        ax.legend()
        fig.tight_layout()
        out = Path(out_file)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=130)
    finally:
        plt.close(fig)
    return CompareResult(out_file=Path(out_file), overtake_iteration=overtake)
