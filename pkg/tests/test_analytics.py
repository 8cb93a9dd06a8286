import math

import numpy as np
import pytest

from rehabhome.analytics import (
    NoCycleError,
    asymmetry_index,
    bilinear_resize,
    coefficient_of_variation,
    rasterize_pressure_map,
    spectrogram,
    stance_phase_ratio,
)
from rehabhome.analytics.features import extract_features
from rehabhome.analytics.spectral import frame_parseval_residual, hann_window
from rehabhome.gateway.segment import GaitSegment
from rehabhome.records import Foot
from rehabhome.sim import ImpairmentLevel, default_gait_params, generate_walk


def walk_segment(level=ImpairmentLevel.MILD, seed=3, duration=5.0, scale=1.0):
    params = default_gait_params(level, seed)
    left, right = generate_walk(params, duration, seed=seed)
    return GaitSegment(
        "P",
        0,
        scale * np.stack([f.channels() for f in left]),
        scale * np.stack([f.channels() for f in right]),
    )


class TestCoefficientOfVariation:
    def test_constant_series(self):
        assert coefficient_of_variation([4.2, 4.2, 4.2]) == 0.0

    def test_hand_computed(self):
        # population sigma of {1,2,3} is sqrt(2/3); mean 2
        assert coefficient_of_variation([1, 2, 3]) == pytest.approx(math.sqrt(2.0 / 3.0) / 2.0, rel=1e-12)
        assert coefficient_of_variation([1, 2, 3]) == pytest.approx(0.40825, abs=1e-5)

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            coefficient_of_variation([])

    def test_zero_mean_errors(self):
        with pytest.raises(ValueError):
            coefficient_of_variation([-1.0, 1.0])


class TestAsymmetryIndex:
    def test_symmetric(self):
        assert asymmetry_index(2.5, 2.5) == 0.0

    def test_three_to_one(self):
        assert asymmetry_index(3.0, 1.0) == pytest.approx(1.0)

    def test_zero_sum_errors(self):
        with pytest.raises(ValueError):
            asymmetry_index(0.0, 0.0)

    def test_bounded_by_two(self):
        assert asymmetry_index(1.0, 0.0) == pytest.approx(2.0)


class TestStancePhaseRatio:
    def test_recovers_configured_fraction(self):
        params = default_gait_params(ImpairmentLevel.MILD, 11)
        seg = walk_segment(seed=11, duration=10.0)
        ratio = stance_phase_ratio(seg, Foot.LEFT)
        assert ratio == pytest.approx(params.stance_fraction_left, abs=0.05)

    def test_symmetric_params_near_equal(self):
        seg = walk_segment(seed=13, duration=10.0)
        left = stance_phase_ratio(seg, Foot.LEFT)
        right = stance_phase_ratio(seg, Foot.RIGHT)
        assert abs(left - right) <= 0.02

    def test_all_zero_raises_no_cycle(self):
        seg = GaitSegment("P", 0, np.zeros((1000, 48)), np.zeros((1000, 48)))
        with pytest.raises(NoCycleError):
            stance_phase_ratio(seg, Foot.LEFT)


class TestScaleInvariance:
    def test_features_unchanged_by_uniform_scaling(self):
        base = extract_features(walk_segment(seed=17))
        scaled = extract_features(walk_segment(seed=17, scale=3.7))
        assert scaled.cv == pytest.approx(base.cv, rel=1e-9)
        assert scaled.stance_ratio_left == pytest.approx(base.stance_ratio_left, rel=1e-9)
        assert scaled.stance_asym == pytest.approx(base.stance_asym, rel=1e-9)
        assert scaled.pressure_asym == pytest.approx(base.pressure_asym, rel=1e-9)


def naive_dft_magnitudes(frame):
    n = len(frame)
    out = np.empty(n // 2 + 1)
    for k in range(n // 2 + 1):
        acc = 0j
        for t in range(n):
            acc += frame[t] * np.exp(-2j * np.pi * k * t / n)
        out[k] = abs(acc)
    return out


class TestSpectrogram:
    def test_pure_tone_peak_bin(self):
        rate = 200.0
        t = np.arange(2000) / rate
        signal = np.sin(2 * np.pi * 2.0 * t)
        spec = spectrogram(signal, rate_hz=rate, window_len=128, hop=32)
        freqs = spec.freqs_hz
        for row in spec.magnitudes:
            assert freqs[int(np.argmax(row))] == pytest.approx(2.0, abs=freqs[1])

    def test_zero_signal(self):
        spec = spectrogram(np.zeros(512))
        assert np.all(spec.magnitudes == 0)

    def test_matches_naive_dft(self):
        rng = np.random.default_rng(0)
        signal = rng.normal(size=160)
        spec = spectrogram(signal, window_len=64, hop=32)
        window = hann_window(64)
        for i in range(spec.magnitudes.shape[0]):
            frame = signal[i * 32 : i * 32 + 64] * window
            expected = naive_dft_magnitudes(frame)
            assert np.max(np.abs(spec.magnitudes[i] - expected)) < 1e-9

    def test_parseval_per_frame(self):
        rng = np.random.default_rng(1)
        signal = rng.normal(size=1000)
        spec = spectrogram(signal, window_len=128, hop=32)
        assert frame_parseval_residual(spec, signal) < 1e-6

    def test_bad_window_errors(self):
        with pytest.raises(ValueError):
            spectrogram(np.zeros(64), window_len=128)
        with pytest.raises(ValueError):
            spectrogram(np.zeros(256), window_len=64, hop=0)

    def test_bin_count(self):
        spec = spectrogram(np.ones(256), window_len=64, hop=16)
        assert spec.magnitudes.shape[1] == 33


class TestRasterize:
    def test_all_zero_stays_zero(self):
        seg = GaitSegment("P", 0, np.zeros((1000, 48)), np.zeros((1000, 48)))
        pm = rasterize_pressure_map(seg, Foot.LEFT, 56, 56)
        assert np.all(pm.values == 0)

    def test_constant_normalizes_to_zero(self):
        seg = GaitSegment("P", 0, np.full((1000, 48), 7.0), np.zeros((1000, 48)))
        pm = rasterize_pressure_map(seg, Foot.LEFT, 32, 32)
        assert np.all(pm.values == 0)

    def test_range_and_shape(self):
        seg = walk_segment(seed=19)
        pm = rasterize_pressure_map(seg, Foot.RIGHT, 224, 224)
        assert pm.values.shape == (224, 224)
        assert pm.values.min() >= 0 and pm.values.max() <= 1
        assert pm.values.max() == pytest.approx(1.0)

    def test_smooth_ramp_roundtrip(self):
        y = np.linspace(0, 1, 200)[:, None]
        x = np.linspace(0, 1, 48)[None, :]
        ramp = y + 0.5 * x
        down = bilinear_resize(ramp, 50, 12)
        up = bilinear_resize(down, 200, 48)
        rms = np.sqrt(np.mean((up - ramp) ** 2))
        assert rms < 0.01 * np.sqrt(np.mean(ramp**2))

    def test_monotone_before_normalization(self):
        rng = np.random.default_rng(5)
        a = rng.uniform(0, 1, size=(40, 24))
        b = a + rng.uniform(0, 1, size=(40, 24))
        ra = bilinear_resize(a, 64, 64)
        rb = bilinear_resize(b, 64, 64)
        assert np.all(rb >= ra - 1e-12)

    def test_deterministic(self):
        seg = walk_segment(seed=23)
        a = rasterize_pressure_map(seg, Foot.LEFT, 56, 56)
        b = rasterize_pressure_map(seg, Foot.LEFT, 56, 56)
        assert np.array_equal(a.values, b.values)
