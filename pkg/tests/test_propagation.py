"""Medium response and receiver synthesis tests."""
import math
import time

import numpy as np
import pytest

from riverseis.errors import ContractViolationError, InvalidConfigError
from riverseis.forcing import ForcingSeries
from riverseis.propagation import (
    MediumModel,
    MixWeights,
    ReceiverGeometry,
    VelocitySpectrum,
    green_function,
    propagate_distributed,
    propagate_point_sources,
    synthesize_total,
    velocity_time_series,
)


def medium(**kw):
    return MediumModel(**kw)


def geometry(x=0.0, offset=1.0, r_min=0.1, length=0.0):
    return ReceiverGeometry(
        receiver_x=x, receiver_offset=offset, r_min=r_min, domain_length=length
    )


def series(values, fs=200.0, grid=None):
    return ForcingSeries(
        mechanism="Impact", t0=0.0, fs=fs, values=values, location_grid=grid
    )


class TestGreenFunction:
    def test_reference_value(self):
        # closed form at f=40 Hz, r=1 m with the default medium
        m = medium()
        k = 2.0 * math.pi * 40.0 / 1300.0
        expected = (
            k
            / (8.0 * 2650.0 * 1300.0 * 949.0)
            * math.sqrt(2.0 / (math.pi * k * 1.0))
            * math.exp(-math.pi * 40.0 * 1.0 / (949.0 * 20.0))
        )
        assert green_function(40.0, 1.0, m) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(1.33e-11, rel=5e-3)

    def test_cylindrical_spreading(self):
        # with attenuation switched off, quadrupling r halves the response
        m = medium(q=1e12)
        ratio = green_function(40.0, 4.0, m) / green_function(40.0, 1.0, m)
        assert ratio == pytest.approx(0.5, rel=1e-12)

    def test_attenuation_scaling(self):
        f, r = 40.0, 2.0
        g1 = green_function(f, r, medium(q=20.0))
        g2 = green_function(f, r, medium(q=40.0))
        expected = math.exp(-math.pi * f * r / (949.0 * 40.0))
        assert g1 / g2 == pytest.approx(
            math.exp(-math.pi * f * r / (949.0 * 20.0)) / expected, rel=1e-12
        )

    def test_zero_and_negative_frequency(self):
        m = medium()
        assert green_function(0.0, 1.0, m) == 0.0
        assert green_function(-5.0, 1.0, m) == 0.0
        out = green_function(np.array([-1.0, 0.0, 40.0]), 1.0, m)
        assert out[0] == 0.0 and out[1] == 0.0 and out[2] > 0.0

    def test_rejects_non_positive_distance(self):
        with pytest.raises(InvalidConfigError):
            green_function(40.0, 0.0, medium())

    def test_rejects_bad_medium(self):
        with pytest.raises(InvalidConfigError):
            medium(q=0.0)


class TestPointSources:
    def test_single_impulse_matches_formula(self):
        fs, n = 200.0, 1024
        x = np.zeros(n)
        x[0] = 1.0
        spec = propagate_point_sources(
            [(series(x, fs), 0.0)], geometry(offset=2.0), medium(), fs, n
        )
        freqs = np.fft.rfftfreq(n, 1.0 / fs)
        expected = 2j * np.pi * freqs * green_function(freqs, 2.0, medium())
        np.testing.assert_allclose(spec.values[1:-1], expected[1:-1], rtol=1e-12)
        assert spec.values[0] == 0.0
        assert spec.values[-1] == 0.0

    def test_linearity(self):
        fs, n = 200.0, 512
        rng = np.random.default_rng(0)
        a = rng.standard_normal(n)
        b = rng.standard_normal(n)
        geo, med = geometry(offset=1.0), medium()
        both = propagate_point_sources(
            [(series(a, fs), 1.0), (series(b, fs), 3.0)], geo, med, fs, n
        )
        one = propagate_point_sources([(series(a, fs), 1.0)], geo, med, fs, n)
        two = propagate_point_sources([(series(b, fs), 3.0)], geo, med, fs, n)
        np.testing.assert_allclose(
            both.values, one.values + two.values, rtol=0, atol=1e-18
        )

    def test_empty_source_list(self):
        spec = propagate_point_sources([], geometry(), medium(), 200.0, 256)
        assert np.all(spec.values == 0.0)

    def test_periodic_unwrap(self):
        # a source just past the seam is nearer than the in-reach distance
        fs, n = 200.0, 256
        x = np.zeros(n)
        x[3] = 1.0
        geo = geometry(x=0.5, offset=1.0, length=10.0)
        wrapped = propagate_point_sources([(series(x, fs), 9.5)], geo, medium(), fs, n)
        near = propagate_point_sources([(series(x, fs), -0.5)], geo, medium(), fs, n)
        np.testing.assert_allclose(wrapped.values, near.values, rtol=1e-12, atol=0)

    def test_distance_clamp_logged_once(self, caplog):
        fs, n = 200.0, 256
        x = np.zeros(n)
        x[0] = 1.0
        geo = geometry(x=1.0, offset=0.0, r_min=0.1)
        with caplog.at_level("WARNING", logger="riverseis.propagation"):
            spec = propagate_point_sources(
                [(series(x, fs), 1.0), (series(x, fs), 1.0)], geo, medium(), fs, n
            )
        assert sum("clamped" in rec.message for rec in caplog.records) == 1
        freqs = np.fft.rfftfreq(n, 1.0 / fs)
        expected = 2 * 2j * np.pi * freqs * green_function(freqs, 0.1, medium())
        np.testing.assert_allclose(spec.values[1:-1], expected[1:-1], rtol=1e-12)

    def test_rejects_rate_mismatch(self):
        with pytest.raises(ContractViolationError):
            propagate_point_sources(
                [(series(np.ones(64), fs=100.0), 0.0)], geometry(), medium(), 200.0, 64
            )

    def test_rejects_inconsistent_lengths(self):
        with pytest.raises(ContractViolationError):
            propagate_point_sources(
                [(series(np.ones(64)), 0.0), (series(np.ones(32)), 1.0)],
                geometry(),
                medium(),
                200.0,
                64,
            )

    def test_rejects_series_longer_than_grid(self):
        with pytest.raises(ContractViolationError):
            propagate_point_sources(
                [(series(np.ones(128)), 0.0)], geometry(), medium(), 200.0, 64
            )

    def test_attenuation_shifts_spectrum_down(self):
        # farther receivers lose proportionally more high-frequency power
        fs, n = 200.0, 2048
        x = np.zeros(n)
        x[0] = 1.0
        med = medium()
        freqs = np.fft.rfftfreq(n, 1.0 / fs)
        hi = freqs > 70.0
        shares = []
        for offset in (1.0, 3.0):
            spec = propagate_point_sources(
                [(series(x, fs), 0.0)], geometry(offset=offset), med, fs, n
            )
            power = np.abs(spec.values) ** 2
            shares.append(power[hi].sum() / power.sum())
        assert shares[1] < shares[0]

    def test_frequency_domain_matches_time_convolution(self):
        # single impulse: frequency route equals circular convolution with
        # the inverse-transformed kernel
        fs, n = 200.0, 2**12
        k0 = 137
        x = np.zeros(n)
        x[k0] = 1.0
        geo, med = geometry(offset=1.5), medium()
        start = time.perf_counter()
        spec = propagate_point_sources([(series(x, fs), 0.0)], geo, med, fs, n)
        y_freq = velocity_time_series(spec)
        freqs = np.fft.rfftfreq(n, 1.0 / fs)
        kernel_spec = 2j * np.pi * freqs * green_function(freqs, 1.5, med)
        kernel_spec[0] = 0.0
        kernel_spec[-1] = 0.0
        kernel = np.fft.irfft(kernel_spec, n)
        y_time = np.roll(kernel, k0)
        elapsed = time.perf_counter() - start
        rel = np.sqrt(np.mean((y_freq - y_time) ** 2) / np.mean(y_time**2))
        assert rel <= 1e-6
        assert elapsed < 1.0


class TestDistributed:
    def test_single_cell_equals_point_source(self):
        fs, n = 200.0, 512
        rng = np.random.default_rng(2)
        values = rng.standard_normal(n)
        geo, med = geometry(offset=1.0), medium()
        dist = propagate_distributed(
            series(values, fs, grid=np.array([4.0])), geo, med, fs, n
        )
        point = propagate_point_sources([(series(values, fs), 4.0)], geo, med, fs, n)
        np.testing.assert_array_equal(dist.values, point.values)

    def test_two_cells_equal_half_strength_points(self):
        fs, n = 200.0, 512
        rng = np.random.default_rng(3)
        values = rng.standard_normal(n)
        geo, med = geometry(offset=1.0), medium()
        dist = propagate_distributed(
            series(values, fs, grid=np.array([2.0, 6.0])), geo, med, fs, n
        )
        halves = propagate_point_sources(
            [(series(values / 2.0, fs), 2.0), (series(values / 2.0, fs), 6.0)],
            geo,
            med,
            fs,
            n,
        )
        np.testing.assert_allclose(dist.values, halves.values, rtol=1e-12, atol=1e-22)

    def test_rejects_missing_grid(self):
        with pytest.raises(InvalidConfigError):
            propagate_distributed(
                series(np.ones(64)), geometry(), medium(), 200.0, 64
            )
        with pytest.raises(InvalidConfigError):
            propagate_distributed(
                series(np.ones(64), grid=np.array([])), geometry(), medium(), 200.0, 64
            )


class TestSynthesis:
    def make_spectrum(self, seed, fs=200.0, n=512):
        rng = np.random.default_rng(seed)
        values = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
        values[0] = 0.0
        values[-1] = 0.0
        freqs = np.fft.rfftfreq(n, 1.0 / fs)
        return VelocitySpectrum(frequencies=freqs, values=values, fs=fs, n=n)

    def test_single_mechanism_passthrough(self):
        spec = self.make_spectrum(0)
        out = synthesize_total(
            {"impact": spec}, MixWeights(impact=1.0), spec.fs, spec.n
        )
        np.testing.assert_allclose(
            out, np.fft.irfft(spec.values, spec.n), rtol=0, atol=1e-18
        )

    def test_weighted_combination(self):
        a, b = self.make_spectrum(1), self.make_spectrum(2)
        out = synthesize_total(
            {"impact": a, "turbulence": b},
            MixWeights(impact=2.0, turbulence=0.5),
            a.fs,
            a.n,
        )
        expected = np.fft.irfft(2.0 * a.values + 0.5 * b.values, a.n)
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)

    def test_output_is_real_array(self):
        spec = self.make_spectrum(3)
        out = synthesize_total({"rolling": spec}, MixWeights(rolling=1.0), spec.fs, spec.n)
        assert out.dtype == np.float64
        assert out.shape == (spec.n,)

    def test_round_trip(self):
        # time -> spectrum -> time is the identity on the record
        fs, n = 200.0, 1024
        rng = np.random.default_rng(4)
        x = rng.standard_normal(n)
        x -= x.mean()
        spec_values = np.fft.rfft(x)
        spec_values[0] = 0.0
        spec = VelocitySpectrum(
            frequencies=np.fft.rfftfreq(n, 1.0 / fs), values=spec_values, fs=fs, n=n
        )
        back = synthesize_total({"impact": spec}, MixWeights(impact=1.0), fs, n)
        np.testing.assert_allclose(back, x, rtol=0, atol=1e-12)

    def test_rejects_unknown_mechanism(self):
        spec = self.make_spectrum(5)
        with pytest.raises(InvalidConfigError):
            synthesize_total({"magma": spec}, MixWeights(), spec.fs, spec.n)

    def test_rejects_grid_mismatch(self):
        spec = self.make_spectrum(6, n=512)
        with pytest.raises(ContractViolationError):
            synthesize_total({"impact": spec}, MixWeights(impact=1.0), 200.0, 1024)

    def test_rejects_negative_weight(self):
        with pytest.raises(InvalidConfigError):
            MixWeights(impact=-0.1)


class TestVelocitySpectrum:
    def test_rejects_wrong_length(self):
        with pytest.raises(ContractViolationError):
            VelocitySpectrum(
                frequencies=np.zeros(10), values=np.zeros(10, complex), fs=200.0, n=512
            )

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ContractViolationError):
            VelocitySpectrum(
                frequencies=np.zeros(257), values=np.zeros(256, complex), fs=200.0, n=512
            )
