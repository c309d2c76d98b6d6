"""Deterministic ensemble runner.

N trajectories evolve independently; aggregation is bit-reproducible
regardless of worker count because

  * initial conditions come from a counter-based generator (Philox)
    whose draw for particle i depends only on (seed, i),
  * stepping is elementwise over fixed-size blocks (the block layout
    never depends on the worker count, and NumPy ufuncs give the same
    bits for any slicing),
  * per-frame statistics are computed on the full state arrays in
    particle-index order with exactly-rounded summation (math.fsum),
    and histogram merging is integer arithmetic.

Small ensembles (N < 32) run on a pure-Python scalar fast path with the
same update expressions; the paper-resolution single-particle run
(10^6 iterations) completes in about a second.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from .histogram import Histogram, histogram_from_samples, merge_histograms  # noqa: F401
from .maps import SQRT2, TWO_PI, MapParams, StepMode, TrajectoryState
from .scenarios import (
    Annulus,
    BarrierEngine,
    BarrierScenario,
    Box,
    DoubleSlit,
    FreeSpace,
    PointArrays,
    ScenarioSpec,
    SlitArrays,
    SlitEngine,
    make_engine,
)
from .stats import (
    Moments,
    build_frame_histogram,
    forcing_histogram,
    forcing_samples,
    ks_uniform,
    moments,
)

# open-interval margin for uniform phase draws; excludes the logistic
# map's degenerate fixed points at 0 and 1
EPS_OPEN = 1e-6

BLOCK_SIZE = 16384
SCALAR_CUTOFF = 32


# ---------------------------------------------------------------------------
# initial-condition policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPoint:
    """Every particle starts from the same explicit state."""

    tau0: float
    t0: float
    v0: float
    x0: float

    policy = "fixed"


@dataclass(frozen=True)
class RandomTimePhase:
    """Per-particle uniform (tau0, t0) phases; shared position/velocity."""

    x0: float = 0.0
    v0: float = 0.0

    policy = "random_phase"


@dataclass(frozen=True)
class GaussianPosition:
    """Normal initial positions plus per-particle uniform phases."""

    mu_x: float = 0.0
    sigma_x: float = 0.119
    v0: float = 0.0

    policy = "gaussian"

    def __post_init__(self) -> None:
        if self.sigma_x < 0:
            raise ValueError("sigma_x must be >= 0")


InitPolicy = Union[FixedPoint, RandomTimePhase, GaussianPosition]


@dataclass(frozen=True)
class EnsembleSpec:
    n_particles: int
    n_iterations: int
    seed: int
    init: InitPolicy
    params: MapParams = field(default_factory=MapParams)
    mode: Optional[StepMode] = None  # None: use the scenario's natural mode
    snapshot_every: int = 10
    collect_series: bool = False
    series_hist_stride: int = 50

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.series_hist_stride < 1:
            raise ValueError("series_hist_stride must be >= 1")


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------


@dataclass
class Frame:
    iteration: int
    x_hist: Histogram
    v_hist: Histogram
    moments_x: Optional[Moments]
    moments_v: Optional[Moments]
    n_active: int
    n_divergent: int
    extras: dict = field(default_factory=dict)


@dataclass
class TrajectorySeries:
    """Per-iteration (t, v, x) of the first particle, index 0 = initial."""

    t: np.ndarray
    v: np.ndarray
    x: np.ndarray


@dataclass
class TrajectoryStats:
    """Whole-run statistics of the first particle's trajectory.

    Moments and the uniformity test use every iterate; the velocity
    histogram is decimated at series_hist_stride so that downstream
    goodness-of-fit tests see approximately independent samples (the
    velocity autocorrelation time is about two iterations).
    """

    velocity_moments: Moments
    velocity_hist: Histogram
    forcing_hist: Histogram
    forcing_moments: Moments
    t_ks_statistic: float
    t_ks_pass: bool
    stride: int
    occupancy_hist: Optional[Histogram] = None


@dataclass
class EnsembleResult:
    scenario_kind: str
    n_particles: int
    n_iterations: int
    frames: "list[Frame]"
    n_divergent: int = 0
    screen_hits: Optional[np.ndarray] = None  # (k, 3): particle, y, z
    slit_counts: Optional[dict] = None
    transmitted_fraction: Optional[float] = None
    series: Optional[TrajectorySeries] = None
    trajectory: Optional[TrajectoryStats] = None


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------


def _uniform_draws(seed: int, n: int) -> np.ndarray:
    """(n, 4) uniforms; row i depends only on (seed, i)."""
    gen = Generator(Philox(key=seed))
    return gen.random((n, 4))


def _open_unit(u: np.ndarray) -> np.ndarray:
    return EPS_OPEN + u * (1.0 - 2.0 * EPS_OPEN)


def init_particles(spec: EnsembleSpec) -> "list[TrajectoryState]":
    """Materialise the initial states for a point-scenario ensemble."""
    n = spec.n_particles
    init = spec.init
    if isinstance(init, FixedPoint):
        s = TrajectoryState(tau=init.tau0, t=init.t0, v=init.v0, x=init.x0)
        return [s] * n
    u = _uniform_draws(spec.seed, n)
    tau0 = _open_unit(u[:, 0])
    t0 = _open_unit(u[:, 1])
    if isinstance(init, RandomTimePhase):
        x0 = np.full(n, init.x0)
        v0 = init.v0
    elif isinstance(init, GaussianPosition):
        x0 = init.mu_x + init.sigma_x * ndtri(_open_unit(u[:, 2]))
        v0 = init.v0
    else:
        raise TypeError(f"unknown init policy {init!r}")
    return [
        TrajectoryState(tau=float(tau0[i]), t=float(t0[i]), v=v0, x=float(x0[i]))
        for i in range(n)
    ]


def _init_point_arrays(spec: EnsembleSpec) -> PointArrays:
    states = init_particles(spec)
    n = len(states)
    return PointArrays(
        tau=np.array([s.tau for s in states], dtype=np.float64),
        t=np.array([s.t for s in states], dtype=np.float64),
        v=np.array([s.v for s in states], dtype=np.float64),
        x=np.array([s.x for s in states], dtype=np.float64),
        direction=np.ones(n, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------


def resolved_mode(spec: EnsembleSpec, scenario: ScenarioSpec) -> StepMode:
    if spec.mode is not None and spec.mode is not scenario.mode:
        raise ValueError(
            f"scenario '{scenario.kind}' requires {scenario.mode.value} mode, "
            f"config asks for {spec.mode.value}"
        )
    return scenario.mode


def run_ensemble(
    spec: EnsembleSpec, scenario: ScenarioSpec, workers: int = 1
) -> EnsembleResult:
    """Evolve the ensemble and aggregate snapshots deterministically."""
    resolved_mode(spec, scenario)
    if isinstance(scenario, DoubleSlit):
        return _run_slit(spec, scenario, workers)
    if spec.n_particles < SCALAR_CUTOFF:
        return _run_points_scalar(spec, scenario)
    return _run_points_vector(spec, scenario, workers)


def _blocks(n: int) -> "list[slice]":
    return [slice(i, min(i + BLOCK_SIZE, n)) for i in range(0, n, BLOCK_SIZE)]


def _map_blocks(pool, fn, blocks) -> None:
    if pool is None:
        for sl in blocks:
            fn(sl)
    else:
        list(pool.map(fn, blocks))


def _capture_point_frame(
    it: int,
    A: PointArrays,
    alive: np.ndarray,
    engine,
    n_bins: int = 201,
) -> Frame:
    sel = alive
    n_active = int(sel.sum())
    x_sel = A.x[sel]
    v_sel = A.v[sel]
    x_range = engine.x_hist_range()
    x_hist = build_frame_histogram(x_sel, n_bins=n_bins, fixed_range=x_range)
    v_hist = build_frame_histogram(v_sel, n_bins=n_bins)
    mx = moments(x_sel) if n_active else None
    mv = moments(v_sel) if n_active else None
    return Frame(
        iteration=it,
        x_hist=x_hist,
        v_hist=v_hist,
        moments_x=mx,
        moments_v=mv,
        n_active=n_active,
        n_divergent=int(A.n - sel.sum()),
        extras=engine.frame_extras(A, alive),
    )


def _trajectory_stats(
    spec: EnsembleSpec,
    scenario: ScenarioSpec,
    series: TrajectorySeries,
) -> TrajectoryStats:
    v_samples = series.v[1:]
    stride = spec.series_hist_stride
    v_dec = v_samples[stride - 1 :: stride]
    occupancy = None
    if isinstance(scenario, Annulus):
        occupancy = histogram_from_samples(
            series.x[1:], 0.0, scenario.circumference, 50
        )
    f_hist = forcing_histogram((series.t, series.x), spec.params.omega)
    f_m = moments(forcing_samples((series.t, series.x), spec.params.omega))
    ks_stat, ks_pass = ks_uniform(series.t[1:])
    return TrajectoryStats(
        velocity_moments=moments(v_samples),
        velocity_hist=build_frame_histogram(v_dec),
        forcing_hist=f_hist,
        forcing_moments=f_m,
        t_ks_statistic=ks_stat,
        t_ks_pass=ks_pass,
        stride=stride,
        occupancy_hist=occupancy,
    )


def _run_points_vector(
    spec: EnsembleSpec, scenario: ScenarioSpec, workers: int
) -> EnsembleResult:
    n = spec.n_particles
    A = _init_point_arrays(spec)
    engine = make_engine(scenario, spec.params)
    if isinstance(engine, BarrierEngine):
        engine.attach(n)
    alive = A.finite_mask()

    collect = spec.collect_series
    if collect:
        m = spec.n_iterations + 1
        ser_t = np.empty(m)
        ser_v = np.empty(m)
        ser_x = np.empty(m)
        ser_t[0], ser_v[0], ser_x[0] = A.t[0], A.v[0], A.x[0]

    blocks = _blocks(n)
    pool = (
        ThreadPoolExecutor(max_workers=workers)
        if workers > 1 and len(blocks) > 1
        else None
    )

    def step_block(sl: slice) -> None:
        with np.errstate(all="ignore"):
            engine.step_slice(A, sl)

    frames = [_capture_point_frame(0, A, alive, engine)]
    try:
        for it in range(1, spec.n_iterations + 1):
            _map_blocks(pool, step_block, blocks)
            if collect:
                ser_t[it], ser_v[it], ser_x[it] = A.t[0], A.v[0], A.x[0]
            if it % spec.snapshot_every == 0:
                alive &= A.finite_mask()
                frames.append(_capture_point_frame(it, A, alive, engine))
    finally:
        if pool is not None:
            pool.shutdown()

    alive &= A.finite_mask()
    result = EnsembleResult(
        scenario_kind=scenario.kind,
        n_particles=n,
        n_iterations=spec.n_iterations,
        frames=frames,
        n_divergent=int(n - alive.sum()),
    )
    if isinstance(engine, BarrierEngine):
        result.transmitted_fraction = float(engine.transmitted.sum()) / n
    if collect:
        result.series = TrajectorySeries(t=ser_t, v=ser_v, x=ser_x)
        if spec.n_iterations >= 1000:
            result.trajectory = _trajectory_stats(spec, scenario, result.series)
    return result


def _run_points_scalar(spec: EnsembleSpec, scenario: ScenarioSpec) -> EnsembleResult:
    """Pure-Python fast path for small N; same update expressions."""
    p = spec.params
    n = spec.n_particles
    states = init_particles(spec)
    tau = [s.tau for s in states]
    t = [s.t for s in states]
    v = [s.v for s in states]
    x = [s.x for s in states]
    d = [1.0] * n
    transmitted = [False] * n

    engine = make_engine(scenario, p)
    if isinstance(engine, BarrierEngine):
        engine.attach(n)

    collect = spec.collect_series
    if collect:
        m = spec.n_iterations + 1
        ser_t = np.empty(m)
        ser_v = np.empty(m)
        ser_x = np.empty(m)
        ser_t[0], ser_v[0], ser_x[0] = t[0], v[0], x[0]

    cos, sin, exp = math.cos, math.sin, math.exp
    C, K, omega, nu = p.C, p.K, p.omega, p.nu
    div, mu_v = p.vel_divisor, p.mu_v
    kind = scenario.kind
    raw = scenario.mode is StepMode.RAW

    def snapshot(it: int) -> Frame:
        A = PointArrays(
            tau=np.array(tau), t=np.array(t), v=np.array(v),
            x=np.array(x), direction=np.array(d),
        )
        if isinstance(engine, BarrierEngine):
            engine.transmitted = np.array(transmitted, dtype=bool)
        alive = A.finite_mask()
        return _capture_point_frame(it, A, alive, engine)

    frames = [snapshot(0)]
    for it in range(1, spec.n_iterations + 1):
        for i in range(n):
            ti, vi, xi = tau[i], v[i], x[i]
            ti = 4.0 * ti * (1.0 - ti)
            tt = (t[i] + ti * SQRT2) % 1.0
            vi = C * (vi + K * cos(TWO_PI * tt) * sin(omega * xi) * exp(-nu * abs(vi)))
            if raw:
                xn = xi + d[i] * vi
            else:
                xn = xi + d[i] * (vi / div + mu_v)
            if kind == "annulus":
                xn = xn % scenario.circumference
            elif kind == "box":
                while xn > scenario.x_max or xn < scenario.x_min:
                    if xn > scenario.x_max:
                        xn = 2.0 * scenario.x_max - xn
                    else:
                        xn = 2.0 * scenario.x_min - xn
                    d[i] = -d[i]
            elif kind == "barrier":
                lo, hi = scenario.x_barrier, scenario.x_far
                if xi < lo or xi > hi:
                    face = None
                    if xi < lo and xn >= lo:
                        face = lo
                    elif xi > hi and xn <= hi:
                        face = hi
                    if face is not None:
                        v_eff = d[i] * (vi / div + mu_v)
                        if not (0.5 * v_eff * v_eff > scenario.height):
                            xn = 2.0 * face - xn
                            vi = -vi
                            d[i] = -d[i]
                if xn > hi:
                    transmitted[i] = True
            tau[i], t[i], v[i], x[i] = ti, tt, vi, xn
        if collect:
            ser_t[it], ser_v[it], ser_x[it] = t[0], v[0], x[0]
        if it % spec.snapshot_every == 0:
            frames.append(snapshot(it))

    n_div = sum(
        0 if all(map(math.isfinite, (tau[i], t[i], v[i], x[i]))) else 1
        for i in range(n)
    )
    result = EnsembleResult(
        scenario_kind=scenario.kind,
        n_particles=n,
        n_iterations=spec.n_iterations,
        frames=frames,
        n_divergent=n_div,
    )
    if kind == "barrier":
        result.transmitted_fraction = float(sum(transmitted)) / n
    if collect:
        result.series = TrajectorySeries(t=ser_t, v=ser_v, x=ser_x)
        if spec.n_iterations >= 1000:
            result.trajectory = _trajectory_stats(spec, scenario, result.series)
    return result


# ---------------------------------------------------------------------------
# slit runner
# ---------------------------------------------------------------------------


def _init_slit_arrays(spec: EnsembleSpec, scenario: DoubleSlit) -> SlitArrays:
    if not isinstance(spec.init, RandomTimePhase):
        raise ValueError("the double-slit scenario requires the random_phase policy")
    n = spec.n_particles
    A = SlitArrays(n, scenario)
    u = _uniform_draws(spec.seed, n)
    A.tau_y[:] = _open_unit(u[:, 0])
    A.t_y[:] = _open_unit(u[:, 1])
    A.tau_z[:] = _open_unit(u[:, 2])
    A.t_z[:] = _open_unit(u[:, 3])
    A.v_y[:] = spec.init.v0
    A.v_z[:] = spec.init.v0
    return A


def _capture_slit_frame(
    it: int, A: SlitArrays, scenario: DoubleSlit, finite: np.ndarray
) -> Frame:
    alive = A.active_mask() & finite
    half = scenario.frame_hist_halfrange
    bins = scenario.frame_hist_bins
    y_sel = A.y[alive]
    vy_sel = A.v_y[alive]
    fwd = alive & (A.vx > 0)
    back = alive & (A.vx < 0)
    extras = {
        "n_forward": int(fwd.sum()),
        "n_back": int(back.sum()),
        "x_forward": float(A.x[fwd].mean()) if fwd.any() else None,
        "x_back": float(A.x[back].mean()) if back.any() else None,
        "y_fwd_hist": histogram_from_samples(A.y[fwd], -half, half, bins),
        "y_back_hist": histogram_from_samples(A.y[back], -half, half, bins),
        "n_hit": int(A.hit.sum()),
        "n_reflected": int(A.reflected.sum()),
        "n_through": int(A.through.sum()),
    }
    n_active = int(alive.sum())
    return Frame(
        iteration=it,
        x_hist=histogram_from_samples(y_sel, -half, half, bins),
        v_hist=build_frame_histogram(vy_sel),
        moments_x=moments(y_sel) if n_active else None,
        moments_v=moments(vy_sel) if n_active else None,
        n_active=n_active,
        n_divergent=int((~finite).sum()),
        extras=extras,
    )


def _run_slit(
    spec: EnsembleSpec, scenario: DoubleSlit, workers: int
) -> EnsembleResult:
    n = spec.n_particles
    A = _init_slit_arrays(spec, scenario)
    engine = SlitEngine(scenario, spec.params)
    finite = A.finite_mask()

    blocks = _blocks(n)
    pool = (
        ThreadPoolExecutor(max_workers=workers)
        if workers > 1 and len(blocks) > 1
        else None
    )

    def step_block(sl: slice) -> None:
        with np.errstate(all="ignore"):
            engine.step_slice(A, sl)

    hits: "list[tuple[int, float, float]]" = []
    recorded_hit = np.zeros(n, dtype=bool)

    collect = spec.collect_series
    if collect:
        m = spec.n_iterations + 1
        ser_t = np.empty(m)
        ser_v = np.empty(m)
        ser_x = np.empty(m)
        ser_t[0], ser_v[0], ser_x[0] = A.t_y[0], A.v_y[0], A.y[0]

    frames = [_capture_slit_frame(0, A, scenario, finite)]
    last_it = 0
    try:
        for it in range(1, spec.n_iterations + 1):
            _map_blocks(pool, step_block, blocks)
            last_it = it
            new_hits = A.hit & ~recorded_hit
            if new_hits.any():
                for i in np.nonzero(new_hits)[0]:
                    hits.append((int(i), float(A.y[i]), float(A.z[i])))
                recorded_hit |= new_hits
            if collect:
                ser_t[it], ser_v[it], ser_x[it] = A.t_y[0], A.v_y[0], A.y[0]
            if it % spec.snapshot_every == 0:
                finite &= A.finite_mask()
                frames.append(_capture_slit_frame(it, A, scenario, finite))
            if not A.active_mask().any():
                break
    finally:
        if pool is not None:
            pool.shutdown()

    finite &= A.finite_mask()
    hits_arr = np.array(hits, dtype=np.float64).reshape(len(hits), 3)
    result = EnsembleResult(
        scenario_kind=scenario.kind,
        n_particles=n,
        n_iterations=spec.n_iterations,
        frames=frames,
        n_divergent=int((~finite).sum()),
        screen_hits=hits_arr,
        slit_counts={
            "n_reflected": int(A.reflected.sum()),
            "n_hit": int(A.hit.sum()),
            "n_through": int(A.through.sum()),
        },
    )
    if collect:
        end = last_it + 1
        result.series = TrajectorySeries(
            t=ser_t[:end], v=ser_v[:end], x=ser_x[:end]
        )
        if last_it >= 1000:
            result.trajectory = _trajectory_stats(spec, scenario, result.series)
    return result
