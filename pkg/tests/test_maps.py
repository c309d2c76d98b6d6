"""Unit tests for the core map: frozen oracle values, invariants, purity.

Derived expectations were computed beforehand with a 60-digit mpmath
evaluation of the update formulas (see comments at the asserts).
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaosim import (
    MapParams,
    StepMode,
    TrajectoryState,
    kick_step,
    logistic_step,
    position_step,
    step,
    time_step,
)

FIG1_PARAMS = MapParams(C=1 / 3, K=95 / (2 * math.pi), omega=1.0, nu=1 / 2.1)


class TestLogisticStep:
    def test_fixed_point_zero(self):
        assert logistic_step(0.0) == 0.0

    def test_maximum(self):
        assert logistic_step(0.5) == 1.0

    def test_nonzero_fixed_point(self):
        assert logistic_step(0.75) == 0.75

    @pytest.mark.parametrize("bad", [-0.1, 1.1, 2.0, -1e-12])
    def test_domain_error(self, bad):
        with pytest.raises(ValueError):
            logistic_step(bad)

    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_stays_in_unit_interval(self, tau0):
        tau = tau0
        for _ in range(200):
            tau = logistic_step(tau)
            assert 0.0 <= tau <= 1.0


class TestTimeStep:
    def test_zero_increment(self):
        assert time_step(0.0, 0.0) == 0.0

    def test_sqrt2_mod_one(self):
        # sqrt(2) mod 1, analytically forced
        assert time_step(0.0, 1.0) == pytest.approx(0.41421356237309515, abs=1e-16)

    def test_high_precision_oracle(self):
        # mpmath 60-digit: (0.9 + 0.5*sqrt(2)) mod 1
        assert time_step(0.9, 0.5) == pytest.approx(0.6071067811865475, abs=1e-15)

    @given(
        st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_result_in_half_open_interval(self, t, tau_next):
        out = time_step(t, tau_next)
        assert 0.0 <= out < 1.0


class TestKickStep:
    def test_cos_zero_kills_kick(self):
        p = MapParams(C=1 / 3, K=10.0, omega=1.0, nu=1 / 2.1)
        # cos(pi/2) is ~6e-17 in doubles, not exactly zero
        assert kick_step(1.0, 0.25, 17.3, p) == pytest.approx(1 / 3, abs=1e-12)

    def test_sin_zero_kills_kick(self):
        p = MapParams(C=1 / 3, K=10.0, omega=1.0, nu=1 / 2.1)
        assert kick_step(2.0, 0.0, 0.0, p) == 2.0 / 3.0

    def test_high_precision_oracle(self):
        # mpmath 60-digit: (1/3)(1 + 10 exp(-1/2.1)) at x = pi/2
        p = MapParams(C=1 / 3, K=10.0, omega=1.0, nu=1 / 2.1)
        assert kick_step(1.0, 0.0, math.pi / 2, p) == pytest.approx(
            2.403817192051505, abs=1e-14
        )


class TestPositionStep:
    def test_raw_direct_sum(self):
        p = MapParams()
        assert position_step(0.1, 0.5, StepMode.RAW, p, 1.0) == 0.6

    def test_scaled_pure_drift(self):
        p = MapParams(mu_v=0.1, vel_divisor=50.0)
        assert position_step(0.0, 0.0, StepMode.SCALED, p, 1.0) == 0.1

    def test_scaled_leftward(self):
        p = MapParams(mu_v=0.1, vel_divisor=50.0)
        assert position_step(5.0, 1.0, StepMode.SCALED, p, -1.0) == pytest.approx(
            4.88, rel=1e-15
        )


class TestCompositeStep:
    def test_global_fixed_point(self):
        s = TrajectoryState(tau=0.0, t=0.0, v=0.0, x=0.0)
        out = step(s, MapParams(), StepMode.RAW)
        assert (out.tau, out.t, out.v, out.x) == (0.0, 0.0, 0.0, 0.0)

    def test_hand_checked_composite(self):
        # mpmath 60-digit straight-line evaluation of one step from
        # (tau=0.1, t=0, v=0, x=0.1) with C=1/3, K=95/2pi, w=1, nu=1/2.1
        s = TrajectoryState(tau=0.1, t=0.0, v=0.0, x=0.1)
        out = step(s, FIG1_PARAMS, StepMode.RAW)
        assert out.tau == pytest.approx(0.36, abs=1e-16)
        assert out.t == pytest.approx(0.5091168824543142, abs=1e-15)
        assert out.v == pytest.approx(-0.5023258070957541, abs=1e-13)
        assert out.x == pytest.approx(-0.40232580709575416, abs=1e-13)

    def test_invariants_held_over_long_run(self):
        s = TrajectoryState(tau=0.1, t=0.0, v=0.0, x=0.1)
        for _ in range(100_000):
            s = step(s, FIG1_PARAMS, StepMode.RAW)
            assert 0.0 <= s.tau <= 1.0
            assert 0.0 <= s.t < 1.0
            assert math.isfinite(s.v) and math.isfinite(s.x)

    def test_pure_function(self):
        s = TrajectoryState(tau=0.37, t=0.21, v=1.5, x=-3.2)
        a = step(s, FIG1_PARAMS, StepMode.SCALED)
        b = step(s, FIG1_PARAMS, StepMode.SCALED)
        assert (a.tau, a.t, a.v, a.x) == (b.tau, b.t, b.v, b.x)
        assert (s.tau, s.t, s.v, s.x) == (0.37, 0.21, 1.5, -3.2)

    def test_k_zero_geometric_decay(self):
        p = MapParams(C=1 / 3, K=0.0)
        s = TrajectoryState(tau=0.3, t=0.1, v=8.0, x=0.0)
        expected = 8.0
        for n in range(100):
            s = step(s, p, StepMode.RAW)
            expected = (1 / 3) * expected
            assert s.v == expected  # single multiply per step, bit exact
        assert s.v == pytest.approx(8.0 * (1 / 3) ** 100, rel=1e-12)

    def test_position_perturbation_isolated_to_kick_field(self):
        # changing x0 must leave tau' and t' untouched and move v' only
        # through the sin(omega x) factor
        p = FIG1_PARAMS
        s0 = TrajectoryState(tau=0.3, t=0.4, v=1.2, x=2.0)
        s1 = TrajectoryState(tau=0.3, t=0.4, v=1.2, x=2.0 + 1e-3)
        a, b = step(s0, p, StepMode.RAW), step(s1, p, StepMode.RAW)
        assert a.tau == b.tau and a.t == b.t
        phase = math.cos(2 * math.pi * a.t)
        damp = math.exp(-p.nu * abs(s0.v))
        predicted = p.C * p.K * phase * damp * (math.sin(p.omega * s1.x) - math.sin(p.omega * s0.x))
        assert (b.v - a.v) == pytest.approx(predicted, rel=1e-9)

    def test_tau_perturbation_acts_through_time_phase(self):
        # changing tau0 reaches v' only via t'; the spatial factor and
        # damping stay those of the unperturbed x and v
        p = FIG1_PARAMS
        s0 = TrajectoryState(tau=0.3, t=0.4, v=1.2, x=2.0)
        s1 = TrajectoryState(tau=0.3 + 1e-3, t=0.4, v=1.2, x=2.0)
        a, b = step(s0, p, StepMode.RAW), step(s1, p, StepMode.RAW)
        assert a.t != b.t
        for out in (a, b):
            assert out.v == kick_step(s0.v, out.t, s0.x, p)

    def test_mode_mismatch_positions(self):
        s = TrajectoryState(tau=0.2, t=0.7, v=2.0, x=1.0)
        p = MapParams(mu_v=0.1, vel_divisor=50.0)
        raw = step(s, p, StepMode.RAW)
        scaled = step(s, p, StepMode.SCALED)
        assert raw.v == scaled.v
        assert raw.x == 1.0 + raw.v
        assert scaled.x == 1.0 + (scaled.v / 50.0 + 0.1)


class TestParamValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"C": 0.0},
            {"C": 1.5},
            {"K": -1.0},
            {"nu": -0.1},
            {"vel_divisor": 0.0},
        ],
    )
    def test_rejects_bad_params(self, kwargs):
        with pytest.raises(ValueError):
            MapParams(**kwargs)


@settings(max_examples=200)
@given(
    tau=st.floats(min_value=0.0, max_value=1.0),
    t=st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
    v=st.floats(min_value=-50.0, max_value=50.0),
    x=st.floats(min_value=-1e6, max_value=1e6),
)
def test_step_preserves_state_invariants(tau, t, v, x):
    s = TrajectoryState(tau=tau, t=t, v=v, x=x)
    out = step(s, FIG1_PARAMS, StepMode.RAW)
    assert 0.0 <= out.tau <= 1.0
    assert 0.0 <= out.t < 1.0
    assert math.isfinite(out.v) and math.isfinite(out.x)
