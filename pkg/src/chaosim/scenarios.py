"""Experiment geometries wrapped around the core map.

Each scenario is one per-iteration transformation: a core map step plus
boundary handling (ring wrap, energy barrier, reflective walls, slit
barrier with phase reinitialisation).  The scalar ``advance_*``
functions are the reference semantics; the ``*Engine`` classes apply
the same update to contiguous slices of per-particle arrays and are
what the ensemble runner drives.

Position updates are scenario-determined: the annulus and the slit's
transverse axes use the raw update, free space, barrier and box use the
scaled one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .maps import MapParams, StepMode, TrajectoryState, step, step_arrays
from .stats import moments

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# scenario specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Annulus:
    """Ring of given circumference; positions wrap into [0, L)."""

    circumference: float = TWO_PI

    kind = "annulus"
    mode = StepMode.RAW

    def __post_init__(self) -> None:
        if not self.circumference > 0:
            raise ValueError("circumference must be > 0")


@dataclass(frozen=True)
class FreeSpace:
    """Unbounded 1-D drift with the scaled position update."""

    kind = "free_space"
    mode = StepMode.SCALED


@dataclass(frozen=True)
class DoubleSlit:
    """3-D slit geometry: constant axial speed, chaotic transverse motion.

    Particles launch at x = 0 with transverse offsets (y0, z0).  On the
    rightward crossing of the barrier plane the pre-step y decides slit
    passage; passing particles get their y-phase reset to
    (reinit_tau, reinit_t), reflected ones reverse their axial speed.
    barrier_enabled / reinit_enabled exist for the ablation studies.
    """

    x_screen: float = 1000.0
    x_barrier: float = 500.0
    slit_centers: "tuple[float, float]" = (-25.0, 25.0)
    slit_width: float = 10.0
    vx: float = 1.0
    reinit_tau: float = 0.1
    reinit_t: float = 0.0
    y0: float = 0.1
    z0: float = 0.1
    barrier_enabled: bool = True
    reinit_enabled: bool = True
    # ~quarter of the kick-field period per bin: resolves the fringe comb
    # while keeping per-bin occupancy high enough for stable prominence
    screen_hist_halfrange: float = 64.0
    screen_hist_bins: int = 81
    frame_hist_halfrange: float = 150.0
    frame_hist_bins: int = 301

    kind = "double_slit"
    mode = StepMode.RAW

    def __post_init__(self) -> None:
        if not self.x_barrier < self.x_screen:
            raise ValueError("x_barrier must be < x_screen")
        if not self.slit_width > 0:
            raise ValueError("slit_width must be > 0")
        if not self.vx > 0:
            raise ValueError("vx must be > 0")

    def in_slit(self, y: float) -> bool:
        half = self.slit_width / 2.0
        return any(abs(y - c) <= half for c in self.slit_centers)


@dataclass(frozen=True)
class BarrierScenario:
    """Finite energy barrier across [x_barrier, x_barrier + width].

    A particle stepping into the barrier region from outside traverses
    it only when its instantaneous kinetic energy (unit mass, effective
    scaled velocity) exceeds the height; otherwise it reflects
    elastically off the face.  With slowdown_inside the transmitted
    particle trades kinetic energy for the barrier potential while
    inside and recovers it on exit.
    """

    x_barrier: float = 3.0
    width: float = 0.5
    height: float = 0.5 * (0.1**2 + 0.032**2)
    slowdown_inside: bool = False

    kind = "barrier"
    mode = StepMode.SCALED

    def __post_init__(self) -> None:
        if not self.width > 0:
            raise ValueError("width must be > 0")
        if self.height < 0:
            raise ValueError("height must be >= 0")

    @property
    def x_far(self) -> float:
        return self.x_barrier + self.width


@dataclass(frozen=True)
class Box:
    """Reflective 1-D box; bounces flip the drift direction only."""

    x_min: float = -5.0
    x_max: float = 5.0

    kind = "box"
    mode = StepMode.SCALED

    def __post_init__(self) -> None:
        if not self.x_min < self.x_max:
            raise ValueError("need x_min < x_max")


ScenarioSpec = Union[Annulus, FreeSpace, DoubleSlit, BarrierScenario, Box]

SCENARIO_KINDS = {
    "annulus": Annulus,
    "free_space": FreeSpace,
    "double_slit": DoubleSlit,
    "barrier": BarrierScenario,
    "box": Box,
}


@dataclass(frozen=True)
class SlitParticle3D:
    """Full state of one slit-experiment particle.

    The transverse coordinates live in the .x field of their
    TrajectoryState.  reflected and hit_screen are terminal for the
    accounting; through_slit marks slit passage on the way to the
    screen.
    """

    y_state: TrajectoryState
    z_state: TrajectoryState
    x: float
    vx: float
    reflected: bool = False
    through_slit: bool = False
    hit_screen: bool = False


# ---------------------------------------------------------------------------
# scalar advances (reference semantics)
# ---------------------------------------------------------------------------


def advance_annulus(s: TrajectoryState, p: MapParams, L: float) -> TrajectoryState:
    """Raw-mode step, then wrap the position into [0, L)."""
    if not L > 0:
        raise ValueError("circumference must be > 0")
    s = step(s, p, StepMode.RAW)
    return replace(s, x=s.x % L)


def advance_free(s: TrajectoryState, p: MapParams) -> TrajectoryState:
    """One scaled-mode step; nothing else."""
    return step(s, p, StepMode.SCALED)


def _with_effective_speed(
    s: TrajectoryState, p: MapParams, new_speed: float
) -> TrajectoryState:
    """Rebuild the internal v so that |direction*(v/divisor + mu_v)| == new_speed."""
    v_eff_signed = math.copysign(new_speed, s.direction * (s.v / p.vel_divisor + p.mu_v))
    v_new = (v_eff_signed * s.direction - p.mu_v) * p.vel_divisor
    return replace(s, v=v_new)


def advance_barrier(
    s: TrajectoryState, p: MapParams, spec: BarrierScenario
) -> TrajectoryState:
    """Scaled step with an energy test on entering the barrier region.

    Entering from either side requires kinetic energy above the height;
    otherwise the particle reflects elastically off the face (both the
    drift direction and the internal velocity flip, position mirrored).
    Transmission leaves the state untouched unless slowdown_inside
    trades the barrier potential against kinetic energy.
    """
    was_inside = spec.x_barrier <= s.x <= spec.x_far
    nxt = step(s, p, StepMode.SCALED)
    v_eff = nxt.direction * (nxt.v / p.vel_divisor + p.mu_v)
    lo, hi = spec.x_barrier, spec.x_far
    if not was_inside:
        if s.x < lo and nxt.x >= lo:
            face = lo
        elif s.x > hi and nxt.x <= hi:
            face = hi
        else:
            return nxt
        energy = 0.5 * v_eff * v_eff
        if energy > spec.height:
            fully_through = nxt.x > hi if face == lo else nxt.x < lo
            if spec.slowdown_inside and not fully_through:
                return _with_effective_speed(
                    nxt, p, math.sqrt(v_eff * v_eff - 2.0 * spec.height)
                )
            return nxt
        return replace(
            nxt, x=2.0 * face - nxt.x, v=-nxt.v, direction=-nxt.direction
        )
    if spec.slowdown_inside and (nxt.x < lo or nxt.x > hi):
        return _with_effective_speed(
            nxt, p, math.sqrt(v_eff * v_eff + 2.0 * spec.height)
        )
    return nxt


def advance_box(s: TrajectoryState, p: MapParams, spec: Box) -> TrajectoryState:
    """Scaled step, then fold the position back into the box.

    Each fold mirrors x about the violated wall and flips the drift
    direction; the internal velocity is left untouched (flipping it as
    well distorts the standing-wave regime at large kick strengths).
    """
    nxt = step(s, p, StepMode.SCALED)
    x, direction = nxt.x, nxt.direction
    while x > spec.x_max or x < spec.x_min:
        if x > spec.x_max:
            x = 2.0 * spec.x_max - x
        else:
            x = 2.0 * spec.x_min - x
        direction = -direction
    return replace(nxt, x=x, direction=direction)


def advance_slit(
    sp: SlitParticle3D, p: MapParams, spec: DoubleSlit
) -> SlitParticle3D:
    """Advance one slit particle a single iteration.

    y and z evolve one raw-mode step each (independent phases); x moves
    by vx.  The barrier test uses the pre-step y.  Reflected particles
    keep evolving leftwards (they stay visible to the aggregate view)
    but can never reach the screen.
    """
    if sp.hit_screen:
        raise ValueError("advance_slit called on a particle that already hit the screen")
    y_pre = sp.y_state.x
    y_state = step(sp.y_state, p, StepMode.RAW)
    z_state = step(sp.z_state, p, StepMode.RAW)
    x_new = sp.x + sp.vx
    vx = sp.vx
    reflected = sp.reflected
    through = sp.through_slit
    hit = sp.hit_screen
    if vx > 0 and sp.x < spec.x_barrier and x_new >= spec.x_barrier:
        passes = (not spec.barrier_enabled) or spec.in_slit(y_pre)
        if passes:
            through = True
            if spec.reinit_enabled:
                y_state = replace(y_state, tau=spec.reinit_tau, t=spec.reinit_t)
        else:
            reflected = True
            vx = -vx
    if not reflected and x_new >= spec.x_screen:
        hit = True
    return SlitParticle3D(
        y_state=y_state,
        z_state=z_state,
        x=x_new,
        vx=vx,
        reflected=reflected,
        through_slit=through,
        hit_screen=hit,
    )


# ---------------------------------------------------------------------------
# vectorised engines
# ---------------------------------------------------------------------------


class PointArrays:
    """Per-particle state arrays for the 1-D scenarios."""

    def __init__(self, tau, t, v, x, direction):
        self.tau = tau
        self.t = t
        self.v = v
        self.x = x
        self.direction = direction

    @property
    def n(self) -> int:
        return self.tau.size

    def finite_mask(self) -> np.ndarray:
        return (
            np.isfinite(self.tau)
            & np.isfinite(self.t)
            & np.isfinite(self.v)
            & np.isfinite(self.x)
        )


class PointEngine:
    """Shared driver for annulus / free space / barrier / box."""

    def __init__(self, scenario: ScenarioSpec, params: MapParams):
        self.scenario = scenario
        self.params = params

    def step_slice(self, A: PointArrays, sl: slice) -> None:
        raise NotImplementedError

    def frame_extras(self, A: PointArrays, alive: np.ndarray) -> dict:
        return {}

    def x_hist_range(self) -> Optional["tuple[float, float]"]:
        return None


class AnnulusEngine(PointEngine):
    def step_slice(self, A: PointArrays, sl: slice) -> None:
        step_arrays(
            A.tau[sl], A.t[sl], A.v[sl], A.x[sl], A.direction[sl],
            self.params, StepMode.RAW,
        )
        np.mod(A.x[sl], self.scenario.circumference, out=A.x[sl])

    def x_hist_range(self):
        return (0.0, self.scenario.circumference)


class FreeSpaceEngine(PointEngine):
    def step_slice(self, A: PointArrays, sl: slice) -> None:
        step_arrays(
            A.tau[sl], A.t[sl], A.v[sl], A.x[sl], A.direction[sl],
            self.params, StepMode.SCALED,
        )


class BarrierEngine(PointEngine):
    def __init__(self, scenario: BarrierScenario, params: MapParams):
        super().__init__(scenario, params)
        self.transmitted: Optional[np.ndarray] = None

    def attach(self, n: int) -> None:
        self.transmitted = np.zeros(n, dtype=bool)

    def step_slice(self, A: PointArrays, sl: slice) -> None:
        p = self.params
        spec = self.scenario
        x_old = A.x[sl].copy()
        step_arrays(
            A.tau[sl], A.t[sl], A.v[sl], A.x[sl], A.direction[sl],
            p, StepMode.SCALED,
        )
        lo, hi = spec.x_barrier, spec.x_far
        x_new = A.x[sl]
        was_inside = (x_old >= lo) & (x_old <= hi)
        enter_l = ~was_inside & (x_old < lo) & (x_new >= lo)
        enter_r = ~was_inside & (x_old > hi) & (x_new <= hi)
        entering = enter_l | enter_r
        v_eff = A.direction[sl] * (A.v[sl] / p.vel_divisor + p.mu_v)
        if entering.any():
            energy = 0.5 * v_eff * v_eff
            blocked = entering & ~(energy > spec.height)
            bl = blocked & enter_l
            br = blocked & enter_r
            x_new[bl] = 2.0 * lo - x_new[bl]
            x_new[br] = 2.0 * hi - x_new[br]
            A.v[sl][blocked] = -A.v[sl][blocked]
            A.direction[sl][blocked] = -A.direction[sl][blocked]
            if spec.slowdown_inside:
                through = entering & ~blocked
                fully = (enter_l & (x_new > hi)) | (enter_r & (x_new < lo))
                slow = through & ~fully
                if slow.any():
                    self._set_speed(
                        A, sl, slow,
                        np.sqrt(v_eff[slow] ** 2 - 2.0 * spec.height),
                    )
        if spec.slowdown_inside:
            leaving = was_inside & ((x_new < lo) | (x_new > hi))
            if leaving.any():
                self._set_speed(
                    A, sl, leaving,
                    np.sqrt(v_eff[leaving] ** 2 + 2.0 * spec.height),
                )
        self.transmitted[sl] |= x_new > hi

    def _set_speed(self, A: PointArrays, sl: slice, mask: np.ndarray, speed) -> None:
        p = self.params
        v_eff = A.direction[sl][mask] * (A.v[sl][mask] / p.vel_divisor + p.mu_v)
        signed = np.copysign(speed, v_eff)
        A.v[sl][mask] = (signed * A.direction[sl][mask] - p.mu_v) * p.vel_divisor

    def frame_extras(self, A: PointArrays, alive: np.ndarray) -> dict:
        sel = self.transmitted & alive
        extras = {"n_transmitted": int(sel.sum())}
        if extras["n_transmitted"] > 0:
            extras["moments_x_transmitted"] = moments(A.x[sel])
        else:
            extras["moments_x_transmitted"] = None
        return extras


class BoxEngine(PointEngine):
    def step_slice(self, A: PointArrays, sl: slice) -> None:
        spec = self.scenario
        step_arrays(
            A.tau[sl], A.t[sl], A.v[sl], A.x[sl], A.direction[sl],
            self.params, StepMode.SCALED,
        )
        x = A.x[sl]
        d = A.direction[sl]
        while True:
            over = x > spec.x_max
            under = x < spec.x_min
            if not (over.any() or under.any()):
                break
            x[over] = 2.0 * spec.x_max - x[over]
            d[over] = -d[over]
            x[under] = 2.0 * spec.x_min - x[under]
            d[under] = -d[under]

    def x_hist_range(self):
        return (self.scenario.x_min, self.scenario.x_max)


def make_engine(scenario: ScenarioSpec, params: MapParams) -> PointEngine:
    if isinstance(scenario, Annulus):
        return AnnulusEngine(scenario, params)
    if isinstance(scenario, FreeSpace):
        return FreeSpaceEngine(scenario, params)
    if isinstance(scenario, BarrierScenario):
        return BarrierEngine(scenario, params)
    if isinstance(scenario, Box):
        return BoxEngine(scenario, params)
    raise TypeError(f"no point engine for scenario {scenario!r}")


class SlitArrays:
    """State arrays for the 3-D slit run."""

    def __init__(self, n: int, spec: DoubleSlit):
        self.tau_y = np.empty(n)
        self.t_y = np.empty(n)
        self.v_y = np.zeros(n)
        self.y = np.full(n, spec.y0, dtype=np.float64)
        self.tau_z = np.empty(n)
        self.t_z = np.empty(n)
        self.v_z = np.zeros(n)
        self.z = np.full(n, spec.z0, dtype=np.float64)
        self.x = np.zeros(n)
        self.vx = np.full(n, spec.vx, dtype=np.float64)
        self.reflected = np.zeros(n, dtype=bool)
        self.through = np.zeros(n, dtype=bool)
        self.hit = np.zeros(n, dtype=bool)
        self.exited = np.zeros(n, dtype=bool)
        self._ones = np.ones(n)

    @property
    def n(self) -> int:
        return self.x.size

    def active_mask(self) -> np.ndarray:
        return ~(self.hit | self.exited)

    def finite_mask(self) -> np.ndarray:
        return (
            np.isfinite(self.tau_y)
            & np.isfinite(self.t_y)
            & np.isfinite(self.v_y)
            & np.isfinite(self.y)
            & np.isfinite(self.tau_z)
            & np.isfinite(self.t_z)
            & np.isfinite(self.v_z)
            & np.isfinite(self.z)
        )


class SlitEngine:
    def __init__(self, scenario: DoubleSlit, params: MapParams):
        self.scenario = scenario
        self.params = params

    def step_slice(self, A: SlitArrays, sl: slice) -> None:
        spec = self.scenario
        active = A.active_mask()[sl]
        if not active.any():
            return
        y_pre = A.y[sl].copy()
        # transverse raw steps for active particles
        for tau, t, v, pos in (
            (A.tau_y, A.t_y, A.v_y, A.y),
            (A.tau_z, A.t_z, A.v_z, A.z),
        ):
            tau_a = tau[sl][active]
            t_a = t[sl][active]
            v_a = v[sl][active]
            pos_a = pos[sl][active]
            ones = np.ones(tau_a.size)
            step_arrays(tau_a, t_a, v_a, pos_a, ones, self.params, StepMode.RAW)
            tau[sl][active] = tau_a
            t[sl][active] = t_a
            v[sl][active] = v_a
            pos[sl][active] = pos_a
        x_old = A.x[sl].copy()
        A.x[sl][active] = x_old[active] + A.vx[sl][active]
        x_new = A.x[sl]
        crossing = (
            active
            & (A.vx[sl] > 0)
            & (x_old < spec.x_barrier)
            & (x_new >= spec.x_barrier)
        )
        if crossing.any():
            half = spec.slit_width / 2.0
            in_slit = np.zeros(crossing.size, dtype=bool)
            for c in spec.slit_centers:
                in_slit |= np.abs(y_pre - c) <= half
            passes = crossing & (in_slit | (not spec.barrier_enabled))
            blocked = crossing & ~passes
            if spec.reinit_enabled and passes.any():
                A.tau_y[sl][passes] = spec.reinit_tau
                A.t_y[sl][passes] = spec.reinit_t
            A.through[sl] |= passes
            A.reflected[sl] |= blocked
            A.vx[sl][blocked] = -A.vx[sl][blocked]
        new_hit = active & ~A.reflected[sl] & (x_new >= spec.x_screen)
        A.hit[sl] |= new_hit
        A.exited[sl] |= A.reflected[sl] & (x_new < 0.0)
