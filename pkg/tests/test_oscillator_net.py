from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from undulab import graph_core as gc
from undulab import oscillator_net as on

phase_lists = st.lists(st.floats(-20, 20, allow_nan=False), min_size=1, max_size=50)


def pair_net(delta_theta=1.0, delta_omega=0.0, alpha=1.0):
    g = gc.Graph.from_edges(2, [(0, 1)])
    return on.OscillatorNetwork(g, [0.0, delta_theta], [0.0, delta_omega], coupling=alpha)


def closed_form_pair(d0, t):
    """Solution of dD/dt = -2 sin D: tan(D/2) = tan(D0/2) exp(-2t)."""
    return 2 * np.arctan(np.tan(d0 / 2) * np.exp(-2 * t))


class TestIntegrate:
    def test_single_free_oscillator(self):
        net = on.OscillatorNetwork(gc.Graph(1), [0.0], [1.0])
        steps = 1000
        _, th = on.integrate(net, math.pi / steps, steps)
        assert th[-1, 0] == pytest.approx(math.pi, abs=1e-12)

    def test_pair_closed_form(self):
        _, th = on.integrate(pair_net(1.0), 0.01, 100)
        d = on.wrap_difference(th[-1, 1] - th[-1, 0])
        assert d == pytest.approx(closed_form_pair(1.0, 1.0), abs=1e-4)

    def test_rk4_fourth_order(self):
        errs = []
        for dt in (0.1, 0.05):
            steps = int(round(1.0 / dt))
            _, th = on.integrate(pair_net(1.0), dt, steps)
            errs.append(abs(on.wrap_difference(th[-1, 1] - th[-1, 0]) - closed_form_pair(1.0, 1.0)))
        assert errs[0] / errs[1] >= 12

    def test_locked_pair(self):
        out = on.two_oscillator_lock(1.0, 1.0)
        assert out["locked"]
        assert out["phase_difference"] == pytest.approx(math.asin(0.5), abs=1e-3)

    def test_lock_matches_network_integration(self):
        g = gc.Graph.from_edges(2, [(0, 1)])
        net = on.OscillatorNetwork(g, [0.0, 0.3], [0.0, 2.5], coupling=1.0)
        _, th = on.integrate(net, 0.01, 500, record_every=500)
        out = on.two_oscillator_lock(2.5, 1.0, T=5.0, theta0=0.3)
        assert out["phase_difference"] == pytest.approx(
            on.wrap_difference(th[-1, 1] - th[-1, 0]), abs=1e-10)

    def test_drifting_pair(self):
        out = on.two_oscillator_lock(2.5, 1.0)
        assert not out["locked"] and out["predicted"] is None

    def test_stability_guard(self):
        net = on.OscillatorNetwork(gc.Graph(1), [0.0], [10.0])
        with pytest.raises(on.StabilityError):
            on.integrate(net, 0.05, 10)
        on.integrate(net, 0.05, 10, allow_unstable=True)

    def test_euler_method(self):
        net = on.OscillatorNetwork(gc.Graph(1), [0.0], [1.0])
        _, th = on.integrate(net, 0.01, 100, method="euler")
        assert th[-1, 0] == pytest.approx(1.0)

    def test_phases_wrapped(self):
        net = on.OscillatorNetwork(gc.Graph(2), [0.0, 6.0], [1.0, 1.0])
        _, th = on.integrate(net, 0.1, 50)
        assert np.all((th >= 0) & (th < 2 * np.pi))

    def test_frequency_shift_rotates_frame(self):
        g = gc.build_lattice_with_shortcuts(4, 2, 0.2, 3)
        rng = np.random.default_rng(0)
        th0, om = rng.uniform(0, 2 * np.pi, 16), rng.normal(0, 0.3, 16)
        a = on.integrate(on.OscillatorNetwork(g, th0, om, 1.0), 0.01, 200)[1][-1]
        b = on.integrate(on.OscillatorNetwork(g, th0, om + 0.7, 1.0), 0.01, 200)[1][-1]
        assert np.max(np.abs(on.wrap_difference(b - a - 0.7 * 2.0))) <= 1e-9

    def test_trajectory_csv(self, tmp_path):
        t, th = on.integrate(pair_net(), 0.1, 3)
        path = tmp_path / "traj.csv"
        on.write_trajectory_csv(path, t, th)
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["t", "node", "theta"] and len(rows) == 1 + 4 * 2


class TestOrderParameter:
    def test_equal(self):
        R, phi = on.order_parameter([0.3] * 5)
        assert R == pytest.approx(1.0) and phi == pytest.approx(0.3)

    def test_antipodal(self):
        assert on.order_parameter([0.0, math.pi])[0] == pytest.approx(0.0, abs=1e-15)

    def test_quarter(self):
        R, phi = on.order_parameter([0.0, math.pi / 2])
        assert R == pytest.approx(math.sqrt(0.5), abs=1e-5) and phi == pytest.approx(math.pi / 4)

    def test_empty(self):
        with pytest.raises(ValueError):
            on.order_parameter([])

    @settings(max_examples=100, deadline=None)
    @given(phase_lists, st.floats(-10, 10, allow_nan=False))
    def test_rotation_invariance(self, phases, c):
        R, phi = on.order_parameter(phases)
        R2, phi2 = on.order_parameter(np.asarray(phases) + c)
        assert 0.0 <= R <= 1.0
        assert R2 == pytest.approx(R, abs=1e-12)
        if R > 1e-6:
            assert abs(on.wrap_difference(phi2 - phi - c)) <= 1e-9


class TestPairCorrelation:
    def test_equal_phases(self):
        g = gc.build_lattice_with_shortcuts(8, 2, 0.0, 0)
        out = on.pair_correlation(np.full(64, 1.2), g.positions, 1.0, side=8)
        assert np.allclose(out["C"], 1.0)

    def test_independent_phases(self):
        g = gc.build_lattice_with_shortcuts(64, 2, 0.0, 0)
        theta = np.random.default_rng(4).uniform(0, 2 * np.pi, 4096)
        out = on.pair_correlation(theta, g.positions, 2.0, side=64)
        assert np.all(np.abs(out["C"][out["pairs"] >= 100]) <= 0.1)

    def test_two_clusters(self):
        g = gc.build_lattice_with_shortcuts(8, 1, 0.0, 0)
        theta = np.where(np.arange(8) < 4, 0.0, math.pi)
        out = on.pair_correlation(theta, g.positions, 1.0)
        # without wrapping, distances >= 4 only join opposite halves
        far = out["r"] > 4
        assert np.allclose(out["C"][far], -1.0)


class TestSync:
    def test_identical_frequencies_synchronize(self):
        res = on.sync_experiment(6, 2, 0.0, 0.0, 1.0, 60.0, [0, 1], init="half_circle")
        assert min(res["control"]["R_per_seed"]) >= 0.999

    def test_no_coupling_stays_random(self):
        res = on.sync_experiment(16, 2, 0.05, 0.3, 0.0, 10.0, range(5))
        # random-phase baseline: E[R] ~ sqrt(pi / 4N) ~ 0.055
        assert res["shortcuts"]["R_mean"] <= 5 * math.sqrt(1 / 256)

    def test_control_shares_frequencies(self):
        a = on.sync_run(8, 2, 0.3, 0.3, 1.0, 1.0, seed=5)
        b = on.sync_run(8, 2, 0.0, 0.3, 1.0, 1.0, seed=5)
        assert a["translocal_edges"] > 0 and b["translocal_edges"] == 0

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            on.sync_run(4, 2, 0.0, -1.0, 1.0, 1.0, 0)


W0 = 1.0
DT = 0.05


def series(kind):
    t = np.arange(0, 3 * 2 * np.pi / (0.01 * W0), DT)
    if kind == "pure":
        return t, 3 * np.sin(W0 * t)
    if kind == "amp":
        return t, (3 + 0.1 * np.sin(0.01 * W0 * t)) * np.sin(W0 * t)
    if kind == "phase":
        return t, 3 * np.sin(W0 * t + 0.05 * np.cos(0.01 * W0 * t))
    return t, (3 + 3 * np.sin(0.01 * W0 * t)) * np.sin(W0 * t)


def rel_l2(est, truth):
    return np.linalg.norm(est - truth) / np.linalg.norm(truth)


class TestDemodulate:
    def test_pure_carrier(self):
        d = on.demodulate(series("pure")[1], DT, W0)
        assert d.carrier_amp == pytest.approx(3.0, abs=1e-3)
        assert np.max(np.abs(d.slow_amp)) <= 1e-3 and np.max(np.abs(d.slow_phase)) <= 1e-3

    def test_amplitude_modulation(self):
        d = on.demodulate(series("amp")[1], DT, W0)
        assert rel_l2(d.slow_amp, 0.1 * np.sin(0.01 * W0 * d.t)) <= 0.05

    def test_phase_modulation(self):
        d = on.demodulate(series("phase")[1], DT, W0)
        assert rel_l2(d.slow_phase, 0.05 * np.cos(0.01 * W0 * d.t)) <= 0.05

    def test_reconstruction_identity(self):
        d = on.demodulate(series("amp")[1], DT, W0)
        assert np.allclose(d.reconstruct() + d.residual, d.signal, atol=1e-12)
        assert np.max(np.abs(d.residual)) <= 0.01

    def test_undersampled(self):
        with pytest.raises(ValueError):
            on.demodulate(np.zeros(1000), 1.0, W0)

    def test_cutoff_above_carrier(self):
        with pytest.raises(ValueError):
            on.demodulate(series("pure")[1], DT, W0, cutoff=1.5)

    def test_signed_envelope(self):
        t = np.arange(0, 200 * np.pi, DT)
        # envelope 1 + 2 cos(0.01 t) passes through zero: a hole, not a phase jump
        d = on.demodulate((1 + 2 * np.cos(0.01 * t)) * np.sin(t), DT, 1.0)
        env = d.carrier_amp + d.slow_amp
        assert env.min() < -0.5 and np.max(np.abs(np.diff(d.slow_phase))) < 0.1


class TestScaleSeparation:
    def test_pure_carrier_passes(self):
        rep = on.scale_separation_check(on.demodulate(series("pure")[1], DT, W0))
        assert rep.all_passed and max(rep.ratios.values()) <= 1e-3

    def test_deep_modulation_fails(self):
        rep = on.scale_separation_check(on.demodulate(series("deep")[1], DT, W0))
        assert not rep.passed["amplitude"]

    def test_small_modulation_ratios(self):
        rep = on.scale_separation_check(on.demodulate(series("amp")[1], DT, W0))
        assert rep.all_passed and max(rep.ratios.values()) <= 0.04
