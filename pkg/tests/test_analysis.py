import numpy as np
import pytest

from pmtrap import analysis as an
from pmtrap import photon_emitter as pe
from pmtrap.errors import (
    InsufficientDataError,
    NoPeakError,
    UndefinedResultError,
)
from pmtrap.langevin import TimeSeries

import oracles


def white_noise_series(sigma=1.0, n=2**17, dt=1e-6, seed=0):
    rng = np.random.default_rng(seed)
    return TimeSeries(sample_interval=dt, samples=rng.normal(0, sigma, n))


class TestPowerSpectralDensity:
    def test_parseval_white_noise(self):
        series = white_noise_series(sigma=2.5)
        spec = an.power_spectral_density(series)
        assert spec.integral() == pytest.approx(np.var(series.samples), rel=0.01)

    def test_flat_for_white_noise(self):
        series = white_noise_series()
        spec = an.power_spectral_density(series)
        half = len(spec.densities) // 2
        assert np.mean(spec.densities[:half]) == pytest.approx(
            np.mean(spec.densities[half:]), rel=0.03)

    def test_sinusoid_peak(self):
        dt = 1e-6
        t = np.arange(2**16) * dt
        f0 = 1.234e5
        series = TimeSeries(sample_interval=dt,
                            samples=np.sin(2 * np.pi * f0 * t))
        spec = an.power_spectral_density(series, segment_length=8192)
        peak = spec.frequencies[np.argmax(spec.densities)]
        df = spec.frequencies[1] - spec.frequencies[0]
        assert abs(peak - f0) <= df
        # peak width comparable to the resolution bandwidth
        above = spec.densities > spec.densities.max() / 2
        assert np.count_nonzero(above) * df < 3 * spec.resolution_bandwidth
        assert spec.integral() == pytest.approx(np.var(series.samples), rel=0.01)

    def test_parseval_generic_inputs(self):
        # holds for correlated and mixed inputs as well
        rng = np.random.default_rng(3)
        base = rng.normal(0, 1, 2**16)
        corr = np.convolve(base, np.ones(8) / 8, mode="same")
        for samples in (corr, base + np.sin(np.arange(2**16) * 0.05)):
            series = TimeSeries(sample_interval=1e-6, samples=samples)
            spec = an.power_spectral_density(series)
            assert spec.integral() == pytest.approx(np.var(samples), rel=0.01)

    def test_too_short_rejected(self):
        series = white_noise_series(n=512)
        with pytest.raises(InsufficientDataError):
            an.power_spectral_density(series, segment_length=512)


def lorentzian(f, a, f0, hw, b):
    return a * hw**2 / ((f - f0) ** 2 + hw**2) + b


class TestFitLorentzian:
    def test_noiseless_exact(self):
        f = np.linspace(1e4, 2e7, 5000)
        true = (3.2e-22, 8e6, 0.31e6, 1.7e-24)
        spec = an.Spectrum(frequencies=f, densities=lorentzian(f, *true),
                           resolution_bandwidth=f[1] - f[0], averages=1)
        fit = an.fit_lorentzian(spec)
        assert fit.amplitude == pytest.approx(true[0], rel=1e-6)
        assert fit.center == pytest.approx(true[1], rel=1e-6)
        assert fit.width == pytest.approx(2 * true[2], rel=1e-6)
        assert fit.background == pytest.approx(true[3], rel=1e-4)

    @pytest.mark.parametrize("scale", [0.01, 0.1, 10.0, 100.0])
    def test_noiseless_parameter_decades(self, scale):
        # exact recovery across two decades around the defaults
        f = np.linspace(1e4, 4e7, 6000)
        true = (1e-20 * scale, 6e6 * np.sqrt(scale), 0.4e6 * scale, 1e-23)
        if true[1] > f[-1] / 2 or true[2] > true[1] / 3:
            true = (true[0], 6e6, 0.4e6, true[3])
        spec = an.Spectrum(frequencies=f, densities=lorentzian(f, *true),
                           resolution_bandwidth=f[1] - f[0], averages=1)
        fit = an.fit_lorentzian(spec)
        assert fit.width == pytest.approx(2 * true[2], rel=1e-6)
        assert fit.center == pytest.approx(true[1], rel=1e-6)

    def test_gamma_units(self):
        f = np.linspace(1e4, 2e7, 4000)
        spec = an.Spectrum(frequencies=f,
                           densities=lorentzian(f, 1e-20, 5e6, 0.25e6, 0.0),
                           resolution_bandwidth=f[1] - f[0], averages=1)
        fit = an.fit_lorentzian(spec)
        # fitted FWHM in Hz maps to the angular damping rate via 2 pi
        assert fit.gamma == pytest.approx(2 * np.pi * 0.5e6, rel=1e-6)

    def test_ci_brackets_width(self):
        rng = np.random.default_rng(8)
        f = np.linspace(1e5, 2e7, 2000)
        clean = lorentzian(f, 3e-22, 8e6, 0.31e6, 1e-24)
        noisy = clean * rng.gamma(50, 1 / 50, len(f))
        spec = an.Spectrum(frequencies=f, densities=noisy,
                           resolution_bandwidth=f[1] - f[0], averages=50)
        fit = an.fit_lorentzian(spec)
        assert fit.width_ci95[0] < fit.width < fit.width_ci95[1]

    def test_flat_spectrum_rejected(self):
        series = white_noise_series(seed=11)
        spec = an.power_spectral_density(series)
        with pytest.raises(NoPeakError):
            an.fit_lorentzian(spec)


def poisson_stream(rate, duration, seed, duty=None):
    rng = np.random.default_rng(seed)
    n = rng.poisson(rate * duration)
    t = np.sort(rng.uniform(0, duration, n))
    ch = rng.integers(0, 2, n).astype(np.uint8)
    return pe.TimeTagStream(channels=ch, timestamps=t, duration=duration)


class TestG2Zero:
    def test_poissonian_source(self):
        stream = poisson_stream(5e4, 2.0, seed=0)
        result = an.g2_zero(stream, 1e-6)
        assert abs(result.g2 - 1.0) < 3 * result.error

    def test_perfect_single_photon(self):
        # at most one event per pulse, split on two channels
        rng = np.random.default_rng(1)
        pulses = np.nonzero(rng.random(1_000_000) < 0.1)[0]
        t = pulses * 1e-6
        ch = rng.integers(0, 2, len(t)).astype(np.uint8)
        stream = pe.TimeTagStream(channels=ch, timestamps=t, duration=1.0)
        result = an.g2_zero(stream, 1e-6)
        assert result.g2 == 0.0
        assert result.zero_lag_counts == 0

    def test_time_shift_invariance(self):
        stream = poisson_stream(5e4, 1.0, seed=2)
        shifted = pe.TimeTagStream(channels=stream.channels,
                                   timestamps=stream.timestamps + 0.37e-6,
                                   duration=stream.duration + 1e-6)
        a = an.g2_zero(stream, 1e-6)
        b = an.g2_zero(shifted, 1e-6)
        assert a.g2 == b.g2
        assert np.array_equal(a.coincidences, b.coincidences)

    def test_channel_swap_invariance(self):
        stream = poisson_stream(5e4, 1.0, seed=3)
        swapped = pe.TimeTagStream(channels=(1 - stream.channels).astype(np.uint8),
                                   timestamps=stream.timestamps,
                                   duration=stream.duration)
        a = an.g2_zero(stream, 1e-6)
        b = an.g2_zero(swapped, 1e-6)
        assert a.g2 == pytest.approx(b.g2, rel=1e-12)

    def test_merged_single_photon_streams(self):
        exc = pe.ExcitationConfig()
        chain = pe.DetectionChain()
        emitter = pe.EmitterModel(auger_pair_prob=1.0)
        s1 = pe.generate_time_tags(exc, emitter, chain, 1.0, seed=40)
        s2 = pe.generate_time_tags(exc, emitter, chain, 1.0, seed=41)
        t = np.concatenate([s1.timestamps, s2.timestamps])
        ch = np.concatenate([s1.channels, s2.channels])
        order = np.argsort(t, kind="stable")
        merged = pe.TimeTagStream(channels=ch[order], timestamps=t[order],
                                  duration=1.0)
        result = an.g2_zero(merged, 1e-6)
        assert abs(result.g2 - 0.5) < 4 * result.error

    def test_empty_channel_rejected(self):
        stream = pe.TimeTagStream(
            channels=np.zeros(100, dtype=np.uint8),
            timestamps=np.linspace(0, 1, 100), duration=1.0)
        with pytest.raises(UndefinedResultError):
            an.g2_zero(stream, 1e-6)

    def test_few_events_warns(self):
        stream = poisson_stream(2e3, 1.0, seed=4)
        with pytest.warns(UserWarning, match="noisy"):
            an.g2_zero(stream, 1e-6)

    def test_error_positive_with_counts(self):
        stream = poisson_stream(5e4, 1.0, seed=5)
        result = an.g2_zero(stream, 1e-6)
        assert result.error > 0
        assert result.coincidences.min() >= 0


class TestBlinkAnalysis:
    def test_constant_rate_peak(self):
        stream = poisson_stream(20e3, 10.0, seed=0)
        hist = an.blink_analysis(stream)
        assert hist.classification == "grey_state_peak"
        # 20 kHz * 500 us = 10 counts per bin
        assert hist.grey_mean_rate == pytest.approx(20e3, rel=0.05)

    def test_two_state_grey_level(self):
        exc = pe.ExcitationConfig()
        chain = pe.DetectionChain()
        emitter = pe.EmitterModel(auger_pair_prob=1.0, blink_mode="two_state",
                                  grey_attenuation=3.0)
        stream = pe.generate_time_tags(exc, emitter, chain, 10.0, seed=50)
        hist = an.blink_analysis(stream)
        bright = pe.expected_count_rate(exc, emitter, chain).rate
        assert hist.classification in ("two_state", "grey_state_peak")
        assert hist.grey_mean_rate == pytest.approx(bright / 3.0, rel=0.10)

    def test_burst_classification(self):
        exc = pe.ExcitationConfig()
        chain = pe.DetectionChain()
        emitter = pe.EmitterModel(auger_pair_prob=1.0, blink_mode="bursts")
        stream = pe.generate_time_tags(exc, emitter, chain, 10.0, seed=51)
        hist = an.blink_analysis(stream)
        assert hist.classification == "exponential_burst"

    def test_deterministic(self):
        stream = poisson_stream(20e3, 5.0, seed=6)
        a = an.blink_analysis(stream)
        b = an.blink_analysis(stream)
        assert a.classification == b.classification
        assert a.grey_mean_rate == b.grey_mean_rate
        assert np.array_equal(a.occurrences, b.occurrences)

    def test_too_short_rejected(self):
        stream = poisson_stream(20e3, 0.2, seed=7)
        with pytest.raises(InsufficientDataError):
            an.blink_analysis(stream)


class TestFitSaturation:
    def test_noiseless_exact(self):
        p_sat = 2.63e-6
        powers = np.linspace(0.2e-6, 12e-6, 10)
        rates = 1.8e5 * (1 - np.exp(-powers / p_sat))
        fit = an.fit_saturation(powers, rates)
        assert fit.saturation_power == pytest.approx(p_sat, rel=1e-6)
        assert fit.amplitude == pytest.approx(1.8e5, rel=1e-6)
        assert fit.spans_saturation

    @pytest.mark.parametrize("p_sat,c", [(0.3e-6, 1e4), (26e-6, 3e6)])
    def test_noiseless_decades(self, p_sat, c):
        powers = np.geomspace(p_sat / 8, p_sat * 8, 12)
        rates = c * (1 - np.exp(-powers / p_sat))
        fit = an.fit_saturation(powers, rates)
        assert fit.saturation_power == pytest.approx(p_sat, rel=1e-6)

    def test_linear_regime_warns(self):
        p_sat = 2.63e-6
        powers = np.linspace(0.01e-6, 0.2e-6, 6)  # far below saturation
        rates = 1.8e5 * (1 - np.exp(-powers / p_sat))
        with pytest.warns(UserWarning, match="ill-conditioned"):
            fit = an.fit_saturation(powers, rates)
        assert not fit.spans_saturation

    def test_noise_recovery_study(self):
        # 5% noise, 8 points: within 15% (median over 100 seeds)
        p_sat = 2.63e-6
        powers = np.geomspace(0.5e-6, 10e-6, 8)
        clean = 1.8e5 * (1 - np.exp(-powers / p_sat))
        errors = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            rates = clean * (1 + rng.normal(0, 0.05, len(powers)))
            fit = an.fit_saturation(powers, rates)
            errors.append(abs(fit.saturation_power / p_sat - 1.0))
        assert np.median(errors) < 0.15

    def test_insufficient_points(self):
        with pytest.raises(InsufficientDataError):
            an.fit_saturation([1e-6, 2e-6, 3e-6], [1.0, 2.0, 3.0])
