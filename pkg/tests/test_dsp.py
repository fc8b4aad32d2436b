"""Signal front-end: windowing, STFT, mel filterbank, normalization, IO."""

import math

import numpy as np
import pytest

from fairdep.dsp import (
    KIND_MEL,
    KIND_RAW,
    SCOPE_PER_GENDER,
    SCOPE_PER_SIGNAL,
    FeatureTensor,
    MelConfig,
    NormStats,
    compute_gender_stats,
    frame_count,
    hann_window,
    hz_to_mel,
    load_feature,
    mel_filterbank,
    mel_spectrogram,
    mel_to_hz,
    save_feature,
    stft_magnitude,
    znorm_per_gender,
    znorm_per_signal,
)
from fairdep.errors import ConfigError, DataError


class TestHannWindow:
    def test_single_point_window_is_one(self):
        np.testing.assert_array_equal(hann_window(1), [1.0])

    def test_length_four_closed_form(self):
        # 0.5 - 0.5*cos(2*pi*n/3) at n = 0..3
        np.testing.assert_allclose(hann_window(4), [0.0, 0.75, 0.75, 0.0], atol=1e-15)

    @pytest.mark.parametrize("w", [2, 3, 17, 1024])
    def test_symmetric(self, w):
        v = hann_window(w)
        np.testing.assert_allclose(v, v[::-1], atol=1e-15)
        assert v.shape == (w,)

    def test_zero_length_rejected(self):
        with pytest.raises(ConfigError):
            hann_window(0)


class TestStftMagnitude:
    def test_frame_count_default_config(self):
        # floor((61952 - 1024)/512) + 1
        assert frame_count(61952, 1024, 512) == 120
        assert frame_count(16000, 1024, 512) == 30

    def test_output_shape(self):
        mag = stft_magnitude(np.ones(16000))
        assert mag.shape == (513, 30)

    def test_zero_signal_all_zero(self):
        mag = stft_magnitude(np.zeros(4096))
        assert np.all(mag == 0.0)

    def test_signal_shorter_than_window_rejected(self):
        with pytest.raises(DataError):
            stft_magnitude(np.zeros(1023))

    def test_pure_tone_peaks_at_matching_bin(self):
        # 1000 Hz at 16 kHz with 1024-point frames: 1000/(16000/1024) = bin 64
        t = np.arange(16000) / 16000.0
        mag = stft_magnitude(np.sin(2 * np.pi * 1000.0 * t))
        assert np.argmax(mag[:, 5]) == 64

    def test_nonnegative(self, rng):
        mag = stft_magnitude(rng.normal(size=8000))
        assert np.all(mag >= 0.0)


class TestMelScale:
    def test_origin(self):
        assert hz_to_mel(0.0) == 0.0

    def test_700_hz(self):
        # 2595 * log10(2)
        assert abs(hz_to_mel(700.0) - 781.17) < 0.01
        np.testing.assert_allclose(hz_to_mel(700.0), 2595.0 * math.log10(2.0), rtol=1e-12)

    def test_roundtrip(self):
        f = np.array([0.0, 80.0, 700.0, 3500.0, 8000.0])
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, rtol=1e-10, atol=1e-9)


class TestMelFilterbank:
    def setup_method(self):
        self.fb = mel_filterbank(MelConfig(), 513)

    def test_shape_and_nonnegative(self):
        assert self.fb.shape == (40, 513)
        assert np.all(self.fb >= 0.0)

    def test_every_row_has_weight(self):
        assert np.all(self.fb.sum(axis=1) > 0.0)

    def test_center_bins_strictly_increasing(self):
        centers = np.argmax(self.fb, axis=1)
        assert np.all(np.diff(centers) > 0)

    def test_unnormalized_triangles(self):
        # triangles have unit apex; sampling at integer bins can only lose height
        peaks = self.fb.max(axis=1)
        assert np.all(peaks > 0.0)
        assert np.all(peaks <= 1.0 + 1e-12)

    def test_too_many_bands_for_resolution_rejected(self):
        with pytest.raises(ConfigError):
            mel_filterbank(MelConfig(n_mels=40), 33)


class TestMelSpectrogram:
    def test_shape_and_kind(self):
        feat = mel_spectrogram(np.random.default_rng(0).normal(size=61952), source_id=7)
        assert feat.kind == KIND_MEL
        assert feat.source_id == 7
        assert feat.data.shape == (40, 120)
        assert np.all(np.isfinite(feat.data))

    def test_silence_hits_log_floor(self):
        feat = mel_spectrogram(np.zeros(2048))
        np.testing.assert_allclose(feat.data, math.log(1e-10), atol=1e-12)

    def test_short_signal_propagates(self):
        with pytest.raises(DataError):
            mel_spectrogram(np.zeros(100))


class TestZnormPerSignal:
    def test_small_example(self):
        feat = FeatureTensor(np.array([[1.0, 2.0, 3.0]]), KIND_MEL, 1)
        normed, stats = znorm_per_signal(feat)
        # population std of {1,2,3} is sqrt(2/3)
        root = math.sqrt(2.0 / 3.0)
        np.testing.assert_allclose(normed.data, [[-1.0 / root, 0.0, 1.0 / root]], rtol=1e-12)
        np.testing.assert_allclose(normed.data, [[-1.22474487, 0.0, 1.22474487]], atol=1e-8)
        assert stats.scope == SCOPE_PER_SIGNAL

    def test_rows_standardized(self, rng):
        feat = FeatureTensor(rng.normal(3.0, 5.0, size=(40, 311)), KIND_MEL, 2)
        normed, _ = znorm_per_signal(feat)
        assert np.all(np.abs(normed.data.mean(axis=1)) < 1e-6)
        assert np.all(np.abs(normed.data.std(axis=1) - 1.0) < 1e-6)

    def test_constant_row_stays_finite_and_tiny(self):
        # the std floor keeps constant rows finite; the centered residue
        # is float rounding amplified by at most 1/floor
        feat = FeatureTensor(np.full((2, 10), 4.2), KIND_MEL, 3)
        normed, stats = znorm_per_signal(feat)
        assert np.all(np.isfinite(normed.data))
        assert np.all(np.abs(normed.data) < 1e-6)
        assert np.all(stats.std >= 1e-8)

    def test_roundtrip_through_stats(self, rng):
        feat = FeatureTensor(rng.normal(size=(4, 50)), KIND_MEL, 4)
        normed, stats = znorm_per_signal(feat)
        restored = normed.data * stats.std[:, None] + stats.mean[:, None]
        np.testing.assert_allclose(restored, feat.data, rtol=1e-10, atol=1e-12)


class TestGenderStats:
    def test_pooled_hand_example(self):
        f1 = FeatureTensor(np.array([[0.0, 2.0]]), KIND_RAW, 1)
        f2 = FeatureTensor(np.array([[4.0, 6.0]]), KIND_RAW, 2)
        m1 = FeatureTensor(np.array([[10.0, 10.0]]), KIND_RAW, 3)
        stats = compute_gender_stats([(f1, "F"), (f2, "F"), (m1, "M")])
        # pooled F values {0,2,4,6}: mean 3, population var 5
        np.testing.assert_allclose(stats["F"].mean, [3.0])
        np.testing.assert_allclose(stats["F"].std, [math.sqrt(5.0)])
        assert stats["M"].std[0] == 1e-8  # constant input floors the std

    def test_apply_matches_manual(self):
        feat = FeatureTensor(np.array([[0.0, 2.0]]), KIND_RAW, 1)
        stats = NormStats(np.array([3.0]), np.array([2.0]), SCOPE_PER_GENDER, "F")
        out = znorm_per_gender(feat, "F", stats)
        np.testing.assert_allclose(out.data, [[-1.5, -0.5]])

    def test_gender_mismatch_rejected(self):
        feat = FeatureTensor(np.zeros((1, 4)), KIND_RAW, 1)
        stats = NormStats(np.zeros(1), np.ones(1), SCOPE_PER_GENDER, "M")
        with pytest.raises(ConfigError):
            znorm_per_gender(feat, "F", stats)

    def test_wrong_scope_rejected(self):
        feat = FeatureTensor(np.zeros((1, 4)), KIND_RAW, 1)
        stats = NormStats(np.zeros(1), np.ones(1), SCOPE_PER_SIGNAL)
        with pytest.raises(ConfigError):
            znorm_per_gender(feat, "F", stats)

    def test_missing_gender_rejected(self):
        feat = FeatureTensor(np.zeros((1, 4)), KIND_RAW, 1)
        with pytest.raises(DataError):
            compute_gender_stats([(feat, "F")])


class TestFeatureIO:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        feat = FeatureTensor(rng.normal(size=(40, 123)), KIND_MEL, 9)
        normed, stats = znorm_per_signal(feat)
        path = tmp_path / "9.f32"
        save_feature(normed, path, stats)
        loaded, meta = load_feature(path)
        # float32 persistence: loading returns exactly the stored values
        np.testing.assert_array_equal(
            loaded.data, normed.data.astype(np.float32).astype(np.float64)
        )
        assert loaded.kind == KIND_MEL
        assert loaded.source_id == 9
        assert meta["norm_scope"] == SCOPE_PER_SIGNAL

    def test_per_gender_sidecar_carries_stats(self, tmp_path):
        feat = FeatureTensor(np.ones((2, 5)), KIND_MEL, 5)
        stats = NormStats(np.array([1.0, 2.0]), np.array([3.0, 4.0]), SCOPE_PER_GENDER, "M")
        save_feature(feat, tmp_path / "5.f32", stats)
        _, meta = load_feature(tmp_path / "5.f32")
        assert meta["gender"] == "M"
        assert meta["mu"] == [1.0, 2.0]
        assert meta["sigma"] == [3.0, 4.0]

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataError):
            load_feature(tmp_path / "nope.f32")

    def test_truncated_payload_rejected(self, tmp_path):
        feat = FeatureTensor(np.ones((2, 5)), KIND_MEL, 5)
        save_feature(feat, tmp_path / "5.f32")
        blob = (tmp_path / "5.f32").read_bytes()
        (tmp_path / "5.f32").write_bytes(blob[:-4])
        with pytest.raises(DataError):
            load_feature(tmp_path / "5.f32")
