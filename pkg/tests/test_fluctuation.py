from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from undulab import fluctuation as fl

W = fl.raised_cosine_window(2.0)


def ensemble(dims, side, alpha, size, base=0):
    return [fl.synthesize_field(dims, side, alpha, base + i) for i in range(size)]


class TestWindow:
    def test_profile_shape(self):
        u = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
        assert np.allclose(W(u), [1, 1, 1, 0.5, 0, 0])

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 5), st.floats(0, 5))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert W(lo) >= W(hi)

    def test_invalid_support(self):
        with pytest.raises(ValueError):
            fl.raised_cosine_window(1.0)


class TestSynthesis:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, 2.5])
    def test_zero_mean_unit_variance(self, alpha):
        f = fl.synthesize_field(2, 64, alpha, 3)
        assert abs(f.mean) <= 1e-12
        assert np.mean(f.values ** 2) == pytest.approx(1.0)

    def test_deterministic(self):
        a = fl.synthesize_field(3, 16, 1.0, 42).values
        b = fl.synthesize_field(3, 16, 1.0, 42).values
        assert np.array_equal(a, b)

    def test_white_autocovariance(self):
        lag1 = [np.mean(f.values * np.roll(f.values, 1, axis=0))
                for f in ensemble(2, 32, 0.0, 100)]
        # each estimate has std ~ 1/sqrt(N); the mean of 100 has std 1/(32*10)
        assert abs(np.mean(lag1)) <= 4 / (32 * 10)

    def test_alpha2_round_trip_1d(self):
        est, _ = fl.spectral_exponent(fl.synthesize_field(1, 4096, 2.0, 1))
        assert 1.7 <= est <= 2.3

    @pytest.mark.parametrize("side,alpha", [(100, 1.0), (64, 5.0)])
    def test_invalid(self, side, alpha):
        with pytest.raises(ValueError):
            fl.synthesize_field(2, side, alpha, 0)

    def test_parseval(self):
        f = fl.synthesize_field(2, 64, 1.5, 8)
        assert np.sum(fl.power_spectrum(f)) == pytest.approx(np.sum(f.values ** 2), rel=1e-8)

    def test_text_round_trip(self, tmp_path):
        f = fl.synthesize_field(2, 16, 1.0, 2, spacing=0.5)
        f.save(tmp_path / "f.txt")
        g = fl.LatticeField.load(tmp_path / "f.txt")
        assert np.array_equal(f.values, g.values) and g.spacing == 0.5 and g.dims == 2


class TestWindowedSum:
    def test_zero_field(self):
        f = fl.LatticeField(2, 32, np.zeros(32 * 32))
        assert fl.windowed_sum(f, W, 4.0, (3, 3)) == 0.0

    def test_spike(self):
        v = np.zeros((32, 32))
        v[5, 7] = 1.0
        assert fl.windowed_sum(fl.LatticeField(2, 32, v), W, 4.0, (5, 7)) == 1.0

    def test_sharp_constant_1d(self):
        f = fl.LatticeField(1, 64, np.full(64, 2.5))
        assert fl.windowed_sum(f, fl.sharp_window(), 5.0, (10,)) == pytest.approx(11 * 2.5)

    def test_too_large(self):
        with pytest.raises(ValueError):
            fl.windowed_sum(fl.LatticeField(1, 16, np.zeros(16)), W, 5.0, (0,))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 15), st.integers(0, 15))
    def test_linear(self, s1, s2, cx, cy):
        a, b = fl.synthesize_field(2, 16, 0.0, s1), fl.synthesize_field(2, 16, 0.0, s2)
        both = fl.LatticeField(2, 16, a.values + b.values)
        lhs = fl.windowed_sum(both, W, 3.0, (cx, cy))
        rhs = fl.windowed_sum(a, W, 3.0, (cx, cy)) + fl.windowed_sum(b, W, 3.0, (cx, cy))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_fft_matches_direct(self):
        f = fl.synthesize_field(2, 32, 1.0, 5)
        allq = fl.windowed_sums_all(f, W, 3.0)
        for c in [(0, 0), (7, 19), (31, 2)]:
            assert allq[c] == pytest.approx(fl.windowed_sum(f, W, 3.0, c), abs=1e-10)


class TestVarianceScaling:
    def test_iid_2d(self):
        fit = fl.variance_vs_radius(ensemble(2, 256, 0.0, 40), W, [4, 8, 16, 32])
        assert abs(fit.beta - 2.0) <= 0.1

    def test_alpha1_2d(self):
        fit = fl.variance_vs_radius(ensemble(2, 256, 1.0, 40), W, [4, 8, 16, 32])
        assert abs(fit.beta - 1.0) <= 0.15

    def test_alpha1_3d_area_law(self):
        fit = fl.variance_vs_radius(ensemble(3, 64, 1.0, 30), W, [2, 4, 8, 16])
        assert abs(fit.beta - 2.0) <= 0.2

    def test_monotone_in_alpha(self):
        fits = [fl.variance_vs_radius(ensemble(2, 128, a, 20), W, [2, 4, 8, 16])
                for a in (0.0, 1.0, 2.0)]
        for lo, hi in zip(fits, fits[1:]):
            assert lo.beta - hi.beta > 3 * np.hypot(lo.beta_stderr, hi.beta_stderr)

    def test_small_ensemble(self):
        with pytest.raises(ValueError):
            fl.variance_vs_radius(ensemble(2, 32, 0.0, 5), W, [1, 2, 3, 4])

    def test_csv(self, tmp_path):
        fit = fl.variance_vs_radius(ensemble(2, 64, 0.0, 20), W, [1, 2, 4, 8])
        fit.write_csv(tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "R,variance,stderr" and len(lines) == 5


class TestSpectralExponent:
    def test_white(self):
        assert abs(fl.spectral_exponent(fl.synthesize_field(2, 256, 0.0, 0))[0]) <= 0.2

    def test_alpha2(self):
        assert abs(fl.spectral_exponent(fl.synthesize_field(2, 256, 2.0, 0))[0] - 2) <= 0.3

    def test_zero_field(self):
        with pytest.raises(ValueError):
            fl.spectral_exponent(fl.LatticeField(2, 256, np.zeros(256 * 256)))

    def test_small_side(self):
        with pytest.raises(ValueError):
            fl.spectral_exponent(fl.synthesize_field(2, 64, 0.0, 0))


class TestCorrelationIntegral:
    def test_iid_constant(self):
        # raw iid draws; synthesized alpha = 0 fields carry a -1/N covariance
        # from the nulled zero mode
        rng = np.random.default_rng(12)
        iid = [fl.LatticeField(2, 64, rng.standard_normal(64 * 64)) for _ in range(100)]
        rep = fl.correlation_volume_integral(iid, (0, 0), [0, 2, 4, 8])
        rel = [row["relative"] for row in rep["table"]]
        assert rel[0] == pytest.approx(1.0)
        assert np.allclose(rel, 1.0, atol=0.1)

    def test_anticorrelated_cancels(self):
        rep = fl.correlation_volume_integral(ensemble(2, 64, 2.0, 50), (0, 0), [1, 4, 16, 32])
        assert abs(rep["table"][-1]["relative"]) <= 0.1

    def test_zero_field(self):
        zeros = [fl.LatticeField(2, 16, np.zeros(256)) for _ in range(50)]
        rep = fl.correlation_volume_integral(zeros, (0, 0), [1, 4])
        assert all(row["I"] == 0.0 for row in rep["table"])

    def test_nonstationary_estimate(self):
        rep = fl.correlation_volume_integral(ensemble(2, 32, 0.0, 60), (3, 4), [0, 4],
                                             stationary=False)
        assert rep["table"][0]["relative"] == pytest.approx(1.0)

    def test_small_ensemble(self):
        with pytest.raises(ValueError):
            fl.correlation_volume_integral(ensemble(2, 16, 0.0, 10), (0, 0), [1])


class TestBlockAverage:
    def test_constant_mean_preserving(self):
        f = fl.LatticeField(2, 16, np.full(256, 1.5))
        out = fl.block_average(f, 4, 1.0)
        assert out.side == 4 and np.allclose(out.values, 1.5)

    def test_constant_sum(self):
        f = fl.LatticeField(2, 16, np.full(256, 1.5))
        assert np.allclose(fl.block_average(f, 4, 0.0).values, 16 * 1.5)

    def test_clt_normalization(self):
        var = np.mean([np.var(fl.block_average(f, 4, 0.5).values)
                       for f in ensemble(2, 64, 0.0, 20)])
        assert abs(var - 1.0) <= 0.1

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_composition(self, seed):
        f = fl.synthesize_field(2, 16, 1.0, seed)
        twice = fl.block_average(fl.block_average(f, 2, 1.0), 4, 1.0)
        once = fl.block_average(f, 8, 1.0)
        assert np.allclose(twice.values, once.values, atol=1e-12)

    def test_nondivisible(self):
        with pytest.raises(ValueError):
            fl.block_average(fl.LatticeField(1, 16, np.zeros(16)), 3, 1.0)
