"""Production `step` against an independent straight-line scalar oracle.

The oracle below was written directly from the update equations before
the package implementation, as single expressions with no shared
helpers.  Agreement is required to within 1 ulp per component.
"""

import math
import struct

import numpy as np
import pytest

from chaosim import MapParams, StepMode, TrajectoryState, step
from chaosim.maps import step_arrays


def oracle_raw(tau, t, v, x, C, K, omega, nu):
    tau1 = 4.0 * tau * (1.0 - tau)
    t1 = (t + tau1 * math.sqrt(2.0)) % 1.0
    v1 = C * (v + K * math.cos(2.0 * math.pi * t1) * math.sin(omega * x) * math.exp(-nu * abs(v)))
    x1 = v1 + x
    return tau1, t1, v1, x1


def oracle_scaled(tau, t, v, x, C, K, omega, nu, divisor, mu_v, direction):
    tau1 = 4.0 * tau * (1.0 - tau)
    t1 = (t + tau1 * math.sqrt(2.0)) % 1.0
    v1 = C * (v + K * math.cos(2.0 * math.pi * t1) * math.sin(omega * x) * math.exp(-nu * abs(v)))
    x1 = x + direction * (v1 / divisor + mu_v)
    return tau1, t1, v1, x1


def ulp_diff(a: float, b: float) -> int:
    """Distance in representable doubles (0 means bitwise equal)."""
    if a == b:
        return 0
    ia = struct.unpack("<q", struct.pack("<d", a))[0]
    ib = struct.unpack("<q", struct.pack("<d", b))[0]
    if ia < 0:
        ia = -(ia & 0x7FFFFFFFFFFFFFFF)
    if ib < 0:
        ib = -(ib & 0x7FFFFFFFFFFFFFFF)
    return abs(ia - ib)


PARAM_SETS = [
    MapParams(C=1 / 3, K=95 / (2 * math.pi), omega=10.0, nu=1 / 2.1),
    MapParams(C=1 / 3, K=10.0, omega=1.0, nu=1 / 2.1),
    MapParams(C=0.9, K=1000.0, omega=2.5, nu=0.05),
    MapParams(C=1.0, K=0.0, omega=1.0, nu=0.0),
]


def random_states(n, seed):
    rng = np.random.default_rng(seed)
    return zip(
        rng.uniform(0.0, 1.0, n),
        rng.uniform(0.0, 1.0, n),
        rng.uniform(-10.0, 10.0, n),
        rng.uniform(-100.0, 100.0, n),
    )


def test_step_matches_straight_line_oracle_raw():
    checked = 0
    for pi, p in enumerate(PARAM_SETS):
        for tau, t, v, x in random_states(2500, seed=100 + pi):
            s = TrajectoryState(tau=tau, t=t, v=v, x=x)
            out = step(s, p, StepMode.RAW)
            ref = oracle_raw(tau, t, v, x, p.C, p.K, p.omega, p.nu)
            for got, want in zip((out.tau, out.t, out.v, out.x), ref):
                assert ulp_diff(got, want) <= 1
            checked += 1
    assert checked == 10_000


def test_step_matches_straight_line_oracle_scaled():
    p = MapParams(C=1 / 3, K=10.0, omega=1.0, nu=1 / 2.1, vel_divisor=50.0, mu_v=0.1)
    for direction in (1.0, -1.0):
        for tau, t, v, x in random_states(1000, seed=7):
            s = TrajectoryState(tau=tau, t=t, v=v, x=x, direction=direction)
            out = step(s, p, StepMode.SCALED)
            ref = oracle_scaled(
                tau, t, v, x, p.C, p.K, p.omega, p.nu, 50.0, 0.1, direction
            )
            for got, want in zip((out.tau, out.t, out.v, out.x), ref):
                assert ulp_diff(got, want) <= 1


def test_vector_kernel_matches_scalar_step():
    # tau and t involve only exact-rounding ops and must agree bitwise.
    # v picks up NumPy's 1-ulp exp difference, which cancellation in
    # (v + kick) can amplify relative to the result, so the meaningful
    # bound there is absolute at the kick scale (~1e-15 * C * K).
    p = MapParams(C=1 / 3, K=10.0, omega=1.0, nu=1 / 2.1)
    rng = np.random.default_rng(3)
    n = 4096
    tau = rng.uniform(0, 1, n)
    t = rng.uniform(0, 1, n)
    v = rng.uniform(-10, 10, n)
    x = rng.uniform(-100, 100, n)
    direction = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    scalars = [
        step(TrajectoryState(tau[i], t[i], v[i], x[i], direction[i]), p, StepMode.SCALED)
        for i in range(n)
    ]
    step_arrays(tau, t, v, x, direction, p, StepMode.SCALED)
    tol_v = 1e-15 * p.C * (10.0 + p.K)
    for i, s in enumerate(scalars):
        assert float(tau[i]) == s.tau
        assert float(t[i]) == s.t
        assert abs(float(v[i]) - s.v) <= tol_v
        assert abs(float(x[i]) - s.x) <= tol_v / p.vel_divisor + 1e-13


def test_vector_kernel_slice_independent():
    p = MapParams(C=1 / 3, K=10.0, omega=1.0, nu=1 / 2.1)

    def make():
        rng = np.random.default_rng(11)
        n = 10_001
        return (
            rng.uniform(0, 1, n),
            rng.uniform(0, 1, n),
            rng.uniform(-10, 10, n),
            rng.uniform(-100, 100, n),
            np.ones(n),
        )

    a = make()
    b = make()
    step_arrays(*a, p, StepMode.RAW)
    for lo, hi in ((0, 13), (13, 5000), (5000, 10_001)):
        step_arrays(*(arr[lo:hi] for arr in b), p, StepMode.RAW)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
