"""Certified fates: region certificates, comparison profiles, rate fits."""

import math

import numpy as np
import pytest

from trichotomy import (
    EventKind,
    Fate,
    FateKind,
    IntegratorOptions,
    State,
    classify_fate,
    energy,
    exponential_rate_estimate,
    fate_csv_header,
    fate_csv_row,
    integrate,
    velocity_on_energy_shell,
    velocity_profile_difference,
)

TIGHT = IntegratorOptions(rel_tol=1e-11, abs_tol=1e-13)


def on_shell(u0: float) -> State:
    """A state on the critical energy level, nudged onto its upper side."""
    v = velocity_on_energy_shell(0.25, u0)
    while energy((u0, v)) < 0.25:
        v = float(np.nextafter(v, math.inf))
    assert abs(energy((u0, v)) - 0.25) <= 1e-12
    return State(u0, v)


class TestClassifyExamples:
    def test_inner_well_decays(self):
        fate = classify_fate(State(0.5, 0.0), 1.0)
        assert fate.kind is FateKind.DecayZero
        assert fate.time == 0.0

    def test_far_left_small_damping_blows_up(self):
        fate = classify_fate(State(-2.0, 1.0), 0.01)
        assert fate.kind is FateKind.BlowUp

    def test_strong_damping_decays(self):
        fate = classify_fate(State(0.0, 1.0), 2.0)
        assert fate.kind is FateKind.DecayZero
        assert fate.time > 0.0

    @pytest.mark.parametrize("gamma", [0.3, 0.7, 3.0])
    def test_outward_from_saddle_blows_up(self, gamma):
        fate = classify_fate(State(1.0, 0.1), gamma)
        assert fate.kind is FateKind.BlowUp

    def test_witness_is_recorded(self):
        fate = classify_fate(State(0.0, 1.0), 2.0)
        assert isinstance(fate.witness, State)
        assert abs(fate.witness.u) < 1.0
        assert fate.certificate


class TestShellFates:
    def test_undamped_inner_launch_converges_up(self):
        fate = classify_fate(on_shell(0.0), 0.0)
        assert fate.kind is FateKind.ConvergePlus

    def test_undamped_left_launch_converges_down(self):
        fate = classify_fate(on_shell(-1.5), 0.0)
        assert fate.kind is FateKind.ConvergeMinus

    def test_undamped_right_launch_blows_up(self):
        fate = classify_fate(on_shell(1.5), 0.0)
        assert fate.kind is FateKind.BlowUp

    def test_damped_inner_launch_decays(self):
        fate = classify_fate(on_shell(0.0), 0.5)
        assert fate.kind is FateKind.DecayZero

    def test_damped_left_launch_blows_up(self):
        fate = classify_fate(on_shell(-1.5), 0.7)
        assert fate.kind is FateKind.BlowUp


class TestBoundaryBandFates:
    def test_outside_the_saddles(self):
        for gamma in (0.0, 0.5):
            assert classify_fate(State(1.0 + 1e-9, 0.0), gamma).kind is FateKind.BlowUp
            assert classify_fate(State(-1.0 - 1e-9, 0.0), gamma).kind is FateKind.BlowUp

    def test_inside_the_saddles(self):
        for gamma in (0.0, 0.5):
            assert classify_fate(State(1.0 - 1e-9, 0.0), gamma).kind is FateKind.DecayZero
            assert classify_fate(State(-1.0 + 1e-9, 0.0), gamma).kind is FateKind.DecayZero


class TestSymmetry:
    CASES = [
        ((0.5, 0.0), 1.0),
        ((0.0, 1.0), 2.0),
        ((0.0, 1.0), 0.2),
        ((-1.5, 2.0), 1.0),
        ((0.3, -1.1), 0.7),
    ]

    SWAP = {
        FateKind.ConvergePlus: FateKind.ConvergeMinus,
        FateKind.ConvergeMinus: FateKind.ConvergePlus,
    }

    @pytest.mark.parametrize("s0,gamma", CASES)
    def test_mirrored_data(self, s0, gamma):
        a = classify_fate(State(*s0), gamma)
        b = classify_fate(State(-s0[0], -s0[1]), gamma)
        assert b.kind is self.SWAP.get(a.kind, a.kind)

    def test_mirrored_shell_converges_swap(self):
        s = on_shell(0.0)
        a = classify_fate(s, 0.0)
        b = classify_fate(State(-s.u, -s.v), 0.0)
        assert a.kind is FateKind.ConvergePlus
        assert b.kind is FateKind.ConvergeMinus


class TestSoundness:
    CASES = [
        ((0.3, 1.1), 0.7),
        ((0.0, 0.9), 0.2),
        ((-0.5, 1.2), 0.3),
        ((1.2, 0.5), 1.0),
        ((-1.5, 2.0), 0.2),
    ]

    @pytest.mark.parametrize("s0,gamma", CASES)
    def test_blowup_stable_under_tighter_tolerance(self, s0, gamma):
        a = classify_fate(State(*s0), gamma)
        assert a.kind is FateKind.BlowUp
        b = classify_fate(State(*s0), gamma, TIGHT)
        assert b.kind is FateKind.BlowUp

    def test_certificate_times_agree_across_routes(self):
        # the marching kernel and the event integrator must locate the same
        # region-entry time
        for (s0, gamma, kind) in [
            ((0.0, 1.0), 2.0, EventKind.EnteredKPlus),
            ((0.3, 1.1), 0.7, EventKind.EnteredKMinus),
            ((-1.5, 2.0), 1.0, EventKind.EnteredKPlus),
        ]:
            fate = classify_fate(State(*s0), gamma)
            traj = integrate(State(*s0), gamma, stop_events=(kind,))
            ev = traj.first_event(kind)
            assert ev is not None
            assert abs(fate.time - ev.t) <= 1e-6


class TestForwardInvariance:
    def test_after_entering_the_well(self):
        traj = integrate(State(0.0, 1.0), 2.0, t_end=20.0)
        ev = traj.first_event(EventKind.EnteredKPlus)
        assert ev is not None
        after = traj.t > ev.t
        assert after.any()
        e = traj.energies()[after]
        assert np.all(e < 0.25 + 1e-12)
        assert np.all(np.abs(traj.u[after]) < 1.0)

    def test_after_entering_the_outer_component(self):
        traj = integrate(State(0.3, 1.1), 0.7)
        ev = traj.first_event(EventKind.EnteredKMinus)
        assert ev is not None
        after = traj.t > ev.t
        assert after.any()
        e = traj.energies()[after]
        assert np.all(e < 0.25 + 1e-12)
        assert np.all(np.abs(traj.u[after]) > 1.0)


class TestStepSixBound:
    # above the explicit damping bound the fate is never blow-up
    CASES = [
        ((0.0, 1.0), 1.05),
        ((0.0, 1.0), 2.0),
        ((0.0, 1.0), 5.0),
        ((0.5, 0.8), 1.7),
        ((-0.5, 1.2), 2.5),
    ]

    @pytest.mark.parametrize("s0,gamma", CASES)
    def test_never_blowup_above_bound(self, s0, gamma):
        u0, u1 = s0
        assert gamma > max(u1 / (1.0 - u0), u1)
        fate = classify_fate(State(*s0), gamma)
        assert fate.kind is not FateKind.BlowUp
        assert fate.kind is not FateKind.Undetermined


class TestRateEstimate:
    def test_equilibrium_sentinel(self):
        traj = integrate(State(1.0, 0.0), 0.7, t_end=5.0)
        assert exponential_rate_estimate(traj, State(1.0, 0.0)) == math.inf

    def test_threshold_orbit_saddle_rate(self):
        traj = integrate(State(0.0, math.sqrt(0.5)), 0.0, t_end=10.0)
        rate = exponential_rate_estimate(traj, State(1.0, 0.0))
        assert rate == pytest.approx(math.sqrt(2.0), rel=0.15)

    def test_damped_origin_rate(self):
        traj = integrate(State(0.5, 0.0), 1.0, t_end=30.0)
        rate = exponential_rate_estimate(traj, State(0.0, 0.0))
        assert rate == pytest.approx(0.5, rel=0.2)

    def test_misuse_far_from_target(self):
        traj = integrate(State(0.5, 0.0), 1.0, t_end=30.0)
        with pytest.raises(ValueError):
            exponential_rate_estimate(traj, State(1.0, 0.0))


class TestVelocityProfiles:
    def test_positive_gap_examples(self):
        for (s0, g1, g2) in [
            ((0.0, 1.0), 0.0, 0.5),
            ((0.0, 1.0), 0.3, 1.5),
            ((-1.5, 2.0), 0.1, 0.4),
            ((0.5, 0.9), 0.0, 2.0),
        ]:
            x, phi = velocity_profile_difference(State(*s0), g1, g2)
            assert x.size == 100
            assert np.all(x > s0[0])
            assert np.all(np.diff(x) > 0.0)
            assert float(phi.min()) > 0.0

    def test_gap_grows_inside_the_well(self):
        # on (u0, 1] the gap itself is increasing in x
        x, phi = velocity_profile_difference(State(0.0, 1.2), 0.2, 0.9, x_max=1.0)
        assert np.all(x <= 1.0)
        assert np.all(np.diff(phi) > 0.0)

    def test_gap_grows_left_of_the_well(self):
        x, phi = velocity_profile_difference(State(-2.0, 1.5), 0.1, 0.6, x_max=-1.0)
        assert np.all(x <= -1.0)
        assert np.all(np.diff(phi) > 0.0)

    def test_point_count_honored(self):
        x, phi = velocity_profile_difference(State(0.0, 1.0), 0.1, 0.8, n_points=37)
        assert x.size == 37 and phi.size == 37

    def test_rejects_downward_launch(self):
        with pytest.raises(ValueError):
            velocity_profile_difference(State(0.0, -1.0), 0.1, 0.5)

    def test_rejects_unordered_dampings(self):
        with pytest.raises(ValueError):
            velocity_profile_difference(State(0.0, 1.0), 0.5, 0.5)
        with pytest.raises(ValueError):
            velocity_profile_difference(State(0.0, 1.0), 0.8, 0.2)

    def test_rejects_cap_below_launch_point(self):
        with pytest.raises(ValueError):
            velocity_profile_difference(State(1.5, 1.0), 0.1, 0.5, x_max=1.0)


class TestFateCsv:
    def test_header(self):
        assert fate_csv_header() == "u0,u1,gamma,kind,cert_time,witness_u,witness_v"

    def test_row_roundtrip(self):
        s0 = State(0.0, 1.0)
        fate = classify_fate(s0, 2.0)
        row = fate_csv_row(s0, 2.0, fate)
        parts = row.split(",")
        assert len(parts) == 7
        assert float(parts[0]) == 0.0
        assert float(parts[1]) == 1.0
        assert float(parts[2]) == 2.0
        assert parts[3] == fate.kind.value
        assert float(parts[4]) == fate.time
        assert float(parts[5]) == fate.witness.u
