import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirforge.audio import Signal, synth_sine
from mirforge.timefreq import (
    CqtConfig,
    Spectrogram,
    apply_standardize,
    chromagram,
    cqt,
    cqt_center_freqs,
    hz_to_mel,
    interior,
    istft,
    log_compress,
    magnitude,
    mel_filterbank,
    melspectrogram,
    standardize,
    stft,
)


def naive_dft_frame(frame):
    n = len(frame)
    k = np.arange(n // 2 + 1)[:, None]
    return (frame[None, :] * np.exp(-2j * np.pi * k * np.arange(n)[None, :] / n)).sum(axis=1)


class TestStft:
    def test_dc(self):
        c = stft(Signal(np.ones(32), 8000), 8, 8, "rect")
        np.testing.assert_allclose(np.abs(c.bins[0]), 8.0, atol=1e-9)
        np.testing.assert_allclose(np.abs(c.bins[1:]), 0.0, atol=1e-9)

    @pytest.mark.parametrize("k", [1, 5, 17])
    def test_bin_aligned_sine(self, k):
        n_fft, sr = 64, 6400
        s = synth_sine(sr * k / n_fft, 0.1, sr)
        mag = np.abs(stft(s, n_fft, 32, "rect").bins)
        np.testing.assert_allclose(mag[k], n_fft / 2, atol=1e-9)
        others = np.delete(mag, k, axis=0)
        assert others.max() < 1e-9

    def test_matches_direct_dft(self, rng):
        x = rng.standard_normal(200)
        c = stft(Signal(x, 8000), 32, 12, "hann")
        w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(32) / 32)
        for t in (0, 3, c.bins.shape[1] - 1):
            np.testing.assert_allclose(c.bins[:, t], naive_dft_frame(x[t * 12 : t * 12 + 32] * w), atol=1e-10)

    def test_zero(self):
        assert np.all(stft(Signal(np.zeros(100), 8000), 16, 4).bins == 0)

    @pytest.mark.parametrize("length,n_fft,hop", [(100, 16, 4), (512, 512, 128), (1000, 64, 64), (1000, 64, 7)])
    def test_frame_count(self, length, n_fft, hop):
        c = stft(Signal(np.zeros(length), 8000), n_fft, hop)
        assert c.bins.shape == (n_fft // 2 + 1, (length - n_fft) // hop + 1)

    def test_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            stft(Signal(np.zeros(10), 8000), 16, 4)

    def test_power_of_two(self):
        with pytest.raises(ValueError):
            stft(Signal(np.zeros(100), 8000), 24, 4)

    def test_linearity(self, rng):
        x, y = rng.standard_normal(300), rng.standard_normal(300)
        a, b = 1.7, -0.3
        lhs = stft(Signal(a * x + b * y, 8000), 64, 16).bins
        rhs = a * stft(Signal(x, 8000), 64, 16).bins + b * stft(Signal(y, 8000), 64, 16).bins
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * np.abs(rhs).max())

    def test_parseval(self, rng):
        n_fft = 64
        x = rng.standard_normal(n_fft * 5)
        c = stft(Signal(x, 8000), n_fft, n_fft, "rect")
        weights = np.full(n_fft // 2 + 1, 2.0)
        weights[0] = weights[-1] = 1.0
        spectral = (weights[:, None] * np.abs(c.bins) ** 2).sum(axis=0) / n_fft
        temporal = (x.reshape(5, n_fft) ** 2).sum(axis=1)
        np.testing.assert_allclose(spectral, temporal, rtol=1e-6)


class TestIstft:
    @pytest.mark.parametrize("n_fft,hop,window", [(512, 128, "hann"), (256, 64, "hann"), (64, 32, "rect"), (64, 64, "rect")])
    def test_round_trip(self, rng, n_fft, hop, window):
        x = rng.uniform(-1, 1, 8000)
        c = stft(Signal(x, 8000), n_fft, hop, window)
        y = istft(c, window).samples
        region = interior(c.bins.shape[1], n_fft, hop)
        assert np.max(np.abs(y[region] - x[region])) <= 1e-6

    def test_zero(self):
        c = stft(Signal(np.zeros(256), 8000), 64, 16)
        assert np.all(istft(c).samples == 0)

    def test_linear(self, rng):
        c = stft(Signal(rng.standard_normal(256), 8000), 64, 16)
        np.testing.assert_allclose(istft(2 * c).samples, 2 * istft(c).samples, atol=1e-12)

    def test_degenerate_window(self, rng):
        c = stft(Signal(rng.standard_normal(512), 8000), 64, 64, "hann")
        with pytest.raises(ValueError, match="overlap-add"):
            istft(c)


class TestMel:
    def test_zero(self):
        assert hz_to_mel(0) == 0

    def test_decade(self):
        assert hz_to_mel(6300) == 2595

    def test_700(self):
        assert hz_to_mel(700) == pytest.approx(2595 * math.log10(2), rel=1e-12)
        assert hz_to_mel(700) == pytest.approx(781.17, abs=0.01)

    def test_negative(self):
        with pytest.raises(ValueError):
            hz_to_mel(-1)

    @given(st.floats(0, 20000), st.floats(0.001, 20000))
    def test_strictly_increasing(self, f, df):
        assert hz_to_mel(f + df) > hz_to_mel(f)

    def test_filterbank_shape(self):
        assert mel_filterbank(2048, 16000, 40, 0, 8000).shape == (40, 1025)

    def test_filterbank_rows(self):
        fb = mel_filterbank(2048, 16000, 40, 0, 8000)
        w = np.asarray(fb)
        assert np.all(w >= 0)
        for row in w:
            support = np.flatnonzero(row > 0)
            assert support.size > 0
            assert np.all(np.diff(support) == 1)
            assert row.max() == pytest.approx(1.0)

    def test_peaks_uniform_in_mel(self):
        fb = mel_filterbank(2048, 16000, 40, 100, 7000)
        spacing = np.diff(hz_to_mel(fb.peak_hz))
        np.testing.assert_allclose(spacing, spacing[0], atol=1e-9)
        assert fb.peak_hz[0] == pytest.approx(100)
        assert fb.peak_hz[-1] == pytest.approx(7000)

    def test_degenerate_warning(self):
        with pytest.warns(RuntimeWarning):
            fb = mel_filterbank(64, 16000, 60, 0, 8000)
        assert fb.empty_rows

    def test_bad_range(self):
        with pytest.raises(ValueError):
            mel_filterbank(512, 16000, 40, 5000, 4000)

    def test_melspectrogram_zero_and_shape_error(self):
        fb = mel_filterbank(512, 16000, 20)
        mag = Spectrogram(np.zeros((257, 3)), np.arange(257) * 16000 / 512, "stft-mag", 16000)
        out = melspectrogram(mag, fb)
        assert out.kind == "mel" and np.all(out.values == 0)
        bad = Spectrogram(np.zeros((100, 3)), np.arange(100.0), "stft-mag", 16000)
        with pytest.raises(ValueError):
            melspectrogram(bad, fb)

    @pytest.mark.parametrize("row", [5, 12, 25, 33])
    def test_sine_at_peak_dominates(self, row):
        sr, n_fft = 16000, 2048
        fb = mel_filterbank(n_fft, sr, 40, 0, sr / 2)
        s = synth_sine(fb.peak_hz[row], 0.5, sr, 0.5)
        mel = melspectrogram(magnitude(stft(s, n_fft, 512)), fb)
        assert np.all(np.argmax(mel.values, axis=0) == row)
        assert np.all(mel.values >= 0)


class TestCqt:
    def test_center_freqs(self):
        cfg = CqtConfig(32.70, 12, 5)
        f = cqt_center_freqs(cfg)
        assert len(f) == 60
        assert f[0] == 32.70
        assert f[12] == pytest.approx(65.40, rel=1e-15)
        assert f[1] == pytest.approx(32.70 * 2 ** (1 / 12), rel=1e-15)
        assert f[1] == pytest.approx(34.6444, abs=1e-4)

    def test_octave_ratio(self):
        cfg = CqtConfig(27.5, 36, 6)
        f = cqt_center_freqs(cfg)
        np.testing.assert_allclose(f[36:] / f[:-36], 2.0, atol=1e-12)

    def test_zero(self):
        out = cqt(Signal(np.zeros(16000), 16000), CqtConfig(110, 12, 3, 512))
        assert np.all(out.values == 0)

    @pytest.mark.parametrize("k", [3, 14, 26, 40])
    def test_sine_argmax(self, k):
        cfg = CqtConfig(110.0, 12, 4, 512)
        f = cqt_center_freqs(cfg)[k]
        out = cqt(synth_sine(f, 1.0, 16000, 0.5), cfg)
        assert np.all(np.argmax(out.values, axis=0) == k)
        assert out.values.shape[0] == 48

    @pytest.mark.parametrize("k", [2, 7, 11])
    def test_constant_q_normalisation(self, k):
        cfg = CqtConfig(110.0, 12, 3, 512)
        f = cqt_center_freqs(cfg)
        lo = cqt(synth_sine(f[k], 1.0, 16000), cfg).values[k].mean()
        hi = cqt(synth_sine(f[k + 12], 1.0, 16000), cfg).values[k + 12].mean()
        assert hi / lo == pytest.approx(1.0, abs=0.02)
        assert lo == pytest.approx(0.5, abs=0.02)

    def test_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            cqt(Signal(np.zeros(100), 16000), CqtConfig(32.7, 12, 5))

    def test_nyquist(self):
        with pytest.raises(ValueError):
            cqt(Signal(np.zeros(50000), 8000), CqtConfig(300.0, 12, 4))


def _cqt_spec(values):
    values = np.asarray(values, dtype=float)
    return Spectrogram(values, 100 * 2 ** (np.arange(values.shape[0]) / 12), "cqt", 16000)


class TestChroma:
    def test_direct_fold(self):
        v = np.zeros((24, 1))
        v[3] = v[15] = 1.0
        out = chromagram(_cqt_spec(v), 12)
        expected = np.zeros((12, 1))
        expected[3] = 2.0
        np.testing.assert_array_equal(out.values, expected)

    def test_uniform(self):
        out = chromagram(_cqt_spec(np.ones((60, 4))), 12)
        np.testing.assert_array_equal(out.values, 5.0)
        assert out.shape == (12, 4)

    @given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**31))
    @settings(max_examples=30)
    def test_column_sums(self, octaves, frames, seed):
        v = np.random.default_rng(seed).uniform(0, 10, (12 * octaves, frames))
        out = chromagram(_cqt_spec(v), 12)
        np.testing.assert_allclose(out.values.sum(axis=0), v.sum(axis=0), atol=1e-9)

    def test_not_multiple(self):
        with pytest.raises(ValueError):
            chromagram(_cqt_spec(np.ones((13, 2))), 12)


class TestLogStandardize:
    def _spec(self, values):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        return Spectrogram(values, np.arange(values.shape[0]) + 1.0, "mel", 16000)

    def test_log_zero(self):
        out = log_compress(self._spec([[0.0]]), 1e-7)
        assert out.values[0, 0] == pytest.approx(math.log(1e-7))
        assert out.values[0, 0] == pytest.approx(-16.118, abs=1e-3)
        assert out.kind == "log"

    def test_log_one_minus_eps(self):
        assert log_compress(self._spec([[1 - 1e-7]]), 1e-7).values[0, 0] == pytest.approx(0.0, abs=1e-15)

    @given(st.floats(0, 1e6), st.floats(1e-6, 1e6))
    def test_log_monotone(self, lo, gap):
        hi = lo + gap * (1 + lo)
        out = log_compress(self._spec([[lo, hi]])).values[0]
        assert out[0] < out[1]

    def test_log_eps(self):
        with pytest.raises(ValueError):
            log_compress(self._spec([[1.0]]), 0.0)

    def test_standardize(self, rng):
        spec = self._spec(rng.uniform(0, 5, (10, 20)))
        out, mean, std = standardize(spec)
        assert abs(out.values.mean()) < 1e-6
        assert out.values.var() == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_array_equal(apply_standardize(spec.values, mean, std), out.values)

    def test_standardize_constant(self):
        out, _, std = standardize(self._spec(np.full((3, 3), 2.5)))
        assert std == 1e-8
        np.testing.assert_array_equal(out.values, 0.0)


def test_spectrogram_invariants():
    with pytest.raises(ValueError):
        Spectrogram(np.ones((2, 2)), np.array([2.0, 1.0]), "mel", 8000)
    with pytest.raises(ValueError):
        Spectrogram(-np.ones((2, 2)), np.array([1.0, 2.0]), "cqt", 8000)
    Spectrogram(-np.ones((2, 2)), np.array([1.0, 2.0]), "log", 8000)
