import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mirforge.audio import (
    Signal,
    WavFormatError,
    WavParseError,
    downmix,
    load_wav,
    resample,
    synth_sine,
    write_wav,
)
from mirforge.timefreq import stft


def _raw_wav(path, frames, code=1, bits=16, sr=44100, channels=1):
    """Hand-assembled RIFF file, independent of write_wav."""
    dtype = "<i2" if bits == 16 else "<f4"
    payload = np.asarray(frames, dtype=dtype).tobytes()
    align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", code, channels, sr, sr * align, align, bits)
    body = b"WAVEfmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    return path


class TestSignal:
    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            Signal(np.zeros(4), 0)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            Signal(np.array([0.0, np.nan]), 8000)

    def test_immutable(self):
        s = Signal(np.zeros(4), 8000)
        with pytest.raises(ValueError):
            s.samples[0] = 1.0


class TestLoadWav:
    def test_pcm16_full_scale(self, tmp_path):
        s = load_wav(_raw_wav(tmp_path / "a.wav", [32767]))
        assert s.samples[0] == pytest.approx(32767 / 32768)
        assert s.samples[0] == pytest.approx(0.99997, abs=1e-5)

    def test_pcm16_negative_rail(self, tmp_path):
        s = load_wav(_raw_wav(tmp_path / "a.wav", [-32768]))
        assert s.samples[0] == -1.0

    def test_stereo_downmix(self, tmp_path):
        s = load_wav(_raw_wav(tmp_path / "a.wav", [[1.0, -1.0]], code=3, bits=32, channels=2))
        np.testing.assert_array_equal(s.samples, [0.0])

    def test_sample_rate_passthrough(self, tmp_path):
        assert load_wav(_raw_wav(tmp_path / "a.wav", [0, 1, 2], sr=44100)).sample_rate == 44100

    def test_float32(self, tmp_path):
        s = load_wav(_raw_wav(tmp_path / "a.wav", [0.25, -0.5], code=3, bits=32))
        np.testing.assert_array_equal(s.samples, [0.25, -0.5])

    def test_rejects_other_codes(self, tmp_path):
        with pytest.raises(WavFormatError):
            load_wav(_raw_wav(tmp_path / "a.wav", [0, 1], code=2))

    def test_rejects_pcm24(self, tmp_path):
        path = _raw_wav(tmp_path / "a.wav", [0, 1])
        data = bytearray(path.read_bytes())
        struct.pack_into("<H", data, 34, 24)
        path.write_bytes(bytes(data))
        with pytest.raises(WavFormatError):
            load_wav(path)

    def test_truncated(self, tmp_path):
        path = _raw_wav(tmp_path / "a.wav", np.arange(100))
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(WavParseError):
            load_wav(path)

    def test_not_riff(self, tmp_path):
        path = tmp_path / "a.wav"
        path.write_bytes(b"OggS" + bytes(40))
        with pytest.raises(WavParseError):
            load_wav(path)

    def test_skips_unknown_chunks(self, tmp_path):
        path = _raw_wav(tmp_path / "a.wav", [100, 200])
        data = path.read_bytes()
        extra = b"LIST" + struct.pack("<I", 3) + b"abc\x00"
        data = data[:12] + extra + data[12:]
        data = data[:4] + struct.pack("<I", len(data) - 8) + data[8:]
        path.write_bytes(data)
        np.testing.assert_allclose(load_wav(path).samples, [100 / 32768, 200 / 32768])

    @given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=200))
    @settings(max_examples=30, deadline=None)
    def test_pcm16_round_trip(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("rt") / "x.wav"
        s = Signal(np.array(values), 16000)
        write_wav(path, s)
        back = load_wav(path)
        assert back.sample_rate == 16000
        assert np.max(np.abs(back.samples - s.samples)) <= 2.0**-15

    def test_float32_round_trip(self, tmp_path, rng):
        s = Signal(rng.uniform(-1, 1, 50), 22050)
        write_wav(tmp_path / "f.wav", s, "float32")
        np.testing.assert_allclose(load_wav(tmp_path / "f.wav").samples, s.samples, atol=1e-7)


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=50))
def test_downmix_preserves_range(frames):
    out = downmix(np.array(frames))
    assert np.all(np.abs(out) <= 1.0)


class TestResample:
    def test_identity(self):
        s = synth_sine(440, 0.1, 16000)
        assert resample(s, 16000) is s

    def test_rate_idempotent(self, rng):
        s = Signal(rng.uniform(-1, 1, 1000), 44100)
        once = resample(s, 16000)
        twice = resample(once, 16000)
        np.testing.assert_array_equal(once.samples, twice.samples)

    @pytest.mark.parametrize("src,dst", [(44100, 16000), (16000, 44100), (48000, 8000), (8000, 11025)])
    def test_length(self, src, dst):
        s = Signal(np.zeros(4321), src)
        out = resample(s, dst)
        assert len(out) == round(4321 * dst / src)
        assert out.sample_rate == dst

    def test_dc_preserved(self):
        s = Signal(np.full(44100, 0.5), 44100)
        out = resample(s, 16000).samples
        np.testing.assert_allclose(out[200:-200], 0.5, atol=1e-3)

    def test_sine_peak_stays_put(self):
        out = resample(synth_sine(1000, 1.0, 44100, 0.8), 16000)
        n_fft = 1024
        mag = np.abs(stft(out, n_fft, 512).bins).mean(axis=1)
        expected_bin = 1000 * n_fft / 16000
        assert abs(np.argmax(mag) - expected_bin) <= 1

    def test_downsampling_suppresses_alias(self):
        # 7 kHz tone would alias to 1 kHz at 8 kHz without band limiting
        s = synth_sine(7000, 0.5, 44100, 0.9)
        out = resample(s, 8000).samples[100:-100]
        assert np.max(np.abs(out)) < 0.01

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            resample(Signal(np.zeros(10), 8000), 0)


class TestSynthSine:
    def test_zero_amplitude(self):
        np.testing.assert_array_equal(synth_sine(440, 0.01, 8000, 0.0).samples, 0.0)

    def test_quarter_rate_cycle(self):
        s = synth_sine(2000, 0.001, 8000, 1.0)
        np.testing.assert_allclose(s.samples[:8], [0, 1, 0, -1, 0, 1, 0, -1], atol=1e-12)

    @given(st.floats(1.0, 3999.0), st.floats(0.0, 2.0))
    @settings(max_examples=30)
    def test_bounded(self, freq, amp):
        assert np.all(np.abs(synth_sine(freq, 0.01, 8000, amp).samples) <= amp + 1e-12)

    @pytest.mark.parametrize("freq", [4000, 5000])
    def test_aliasing_error(self, freq):
        with pytest.raises(ValueError):
            synth_sine(freq, 0.1, 8000)
