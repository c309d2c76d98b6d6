"""Core update rules of the chaotic particle map.

One iteration advances a four-component state (tau, t, v, x):

    tau' = 4 tau (1 - tau)                       logistic driver
    t'   = (t + tau' sqrt(2)) mod 1              irrational time rotation
    v'   = C [v + K cos(2 pi t') sin(w x) e^(-nu |v|)]   damped kick
    x'   = x + v'                                raw position update
    x'   = x + (v'/divisor + mu_v)               scaled position update

The four sub-steps must be applied in exactly this dependency order:
the time rotation sees the new tau, the kick sees the new t but the old
x and old v, and the position update sees the new v.  All arithmetic is
IEEE double with a pinned evaluation order; there is no fused
multiply-add in pure Python or NumPy ufuncs, so results are reproducible
across runs on the same platform.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi


class StepMode(enum.Enum):
    """Which position update closes the iteration."""

    RAW = "raw"
    SCALED = "scaled"


@dataclass(frozen=True)
class MapParams:
    """Constants of the velocity map plus the scaled-update constants.

    C damps the previous velocity, K sets the kick strength, omega the
    spatial frequency of the kick field, nu the velocity-damping
    exponent.  vel_divisor and mu_v only enter in SCALED mode.
    """

    C: float = 1.0 / 3.0
    K: float = 10.0
    omega: float = 1.0
    nu: float = 1.0 / 2.1
    vel_divisor: float = 50.0
    mu_v: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 < self.C <= 1.0):
            raise ValueError(f"C must be in (0, 1], got {self.C}")
        if self.K < 0.0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if self.nu < 0.0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if not self.vel_divisor > 0.0:
            raise ValueError(f"vel_divisor must be > 0, got {self.vel_divisor}")


@dataclass(frozen=True)
class TrajectoryState:
    """Per-particle dynamical state.

    direction is a +/-1 sign applied to the position increment; it only
    changes when a reflective boundary flips the drift.
    """

    tau: float
    t: float
    v: float
    x: float
    direction: float = 1.0

    def is_finite(self) -> bool:
        return all(
            math.isfinite(c) for c in (self.tau, self.t, self.v, self.x)
        )


def logistic_step(tau: float) -> float:
    """Fully chaotic logistic update tau' = 4 tau (1 - tau)."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    return 4.0 * tau * (1.0 - tau)


def time_step(t: float, tau_next: float) -> float:
    """Irrational rotation t' = (t + tau' sqrt(2)) mod 1.

    The mod is floor-based, so the result is always in [0, 1).
    """
    return (t + tau_next * SQRT2) % 1.0


def kick_step(v: float, t_next: float, x: float, p: MapParams) -> float:
    """Damped velocity kick driven by the time phase and the kick field."""
    return p.C * (
        v
        + p.K
        * math.cos(TWO_PI * t_next)
        * math.sin(p.omega * x)
        * math.exp(-p.nu * abs(v))
    )


def position_step(
    x: float,
    v_next: float,
    mode: StepMode,
    p: MapParams,
    direction: float = 1.0,
) -> float:
    """Advance the position with the raw or scaled increment."""
    if mode is StepMode.RAW:
        return x + direction * v_next
    return x + direction * (v_next / p.vel_divisor + p.mu_v)


def step(s: TrajectoryState, p: MapParams, mode: StepMode) -> TrajectoryState:
    """One full iteration of the map; a pure function of its inputs."""
    tau = logistic_step(s.tau)
    t = time_step(s.t, tau)
    v = kick_step(s.v, t, s.x, p)
    x = position_step(s.x, v, mode, p, s.direction)
    return TrajectoryState(tau=tau, t=t, v=v, x=x, direction=s.direction)


def step_arrays(
    tau: np.ndarray,
    t: np.ndarray,
    v: np.ndarray,
    x: np.ndarray,
    direction: np.ndarray,
    p: MapParams,
    mode: StepMode,
) -> None:
    """Vectorised in-place iteration over per-particle state arrays.

    Elementwise identical to `step` up to at most 1 ulp (NumPy's exp may
    round differently from libm); each element's result is independent
    of array slicing, so block-sharded execution is bit-reproducible.
    """
    one_minus = 1.0 - tau
    tau *= 4.0
    tau *= one_minus
    t += tau * SQRT2
    np.mod(t, 1.0, out=t)
    kick = np.cos(TWO_PI * t)
    kick *= p.K
    kick *= np.sin(p.omega * x)
    kick *= np.exp(-p.nu * np.abs(v))
    v += kick
    v *= p.C
    if mode is StepMode.RAW:
        x += direction * v
    else:
        x += direction * (v / p.vel_divisor + p.mu_v)
