"""Audio input: WAV decoding, downmixing, resampling and test-signal synthesis."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Signal",
    "WavFormatError",
    "WavParseError",
    "load_wav",
    "write_wav",
    "downmix",
    "resample",
    "synth_sine",
]

PCM = 1
IEEE_FLOAT = 3

# zero crossings of the interpolation kernel on each side of its centre
SINC_ZEROS = 32


class WavFormatError(ValueError):
    """The file is a RIFF/WAVE file but uses an unsupported encoding."""


class WavParseError(ValueError):
    """The file is not valid RIFF/WAVE or is truncated."""


@dataclass(frozen=True, eq=False)
class Signal:
    """Mono sample buffer.

    ``samples`` is a float64 array, nominally within [-1, 1]. The range is not
    enforced since band-limited resampling may overshoot slightly near edges.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def downmix(channels: np.ndarray) -> np.ndarray:
    """Average a (n_samples, n_channels) block into one channel."""
    channels = np.asarray(channels, dtype=np.float64)
    if channels.ndim == 1:
        return channels
    return channels.mean(axis=1)


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise WavParseError(f"chunk {cid!r} truncated: expected {size} bytes, found {len(body)}")
        yield cid, body
        pos += 8 + size + (size & 1)


def load_wav(path) -> Signal:
    """Read a PCM-16 or float-32 WAV file as a mono Signal.

    Stereo input is downmixed by channel mean. PCM samples are divided by 32768.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavParseError("file too short for a RIFF header")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise WavParseError("missing RIFF/WAVE signature")

    fmt = None
    payload = None
    for cid, body in _chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavParseError("fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
    if fmt is None:
        raise WavParseError("no fmt chunk")
    if payload is None:
        raise WavParseError("no data chunk")

    code, n_channels, sample_rate, _, block_align, bits = fmt
    if n_channels not in (1, 2):
        raise WavFormatError(f"unsupported channel count {n_channels}")
    if code == PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif code == IEEE_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise WavFormatError(f"unsupported encoding: format code {code}, {bits} bits")
    if block_align != n_channels * dtype.itemsize:
        raise WavParseError(f"inconsistent block_align {block_align}")
    if len(payload) % block_align:
        raise WavParseError("data chunk ends mid-frame")

    frames = np.frombuffer(payload, dtype=dtype).reshape(-1, n_channels).astype(np.float64)
    if code == PCM:
        frames /= 32768.0
    return Signal(downmix(frames), sample_rate)


def write_wav(path, signal: Signal, encoding: str = "pcm16") -> None:
    """Write a mono WAV file; ``encoding`` is ``pcm16`` or ``float32``."""
    x = signal.samples
    if encoding == "pcm16":
        code, bits = PCM, 16
        pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        payload = pcm.tobytes()
    elif encoding == "float32":
        code, bits = IEEE_FLOAT, 32
        payload = x.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    align = bits // 8
    fmt = struct.pack("<HHIIHH", code, 1, signal.sample_rate, signal.sample_rate * align, align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def _phase_table(up: int, down: int) -> tuple[np.ndarray, int]:
    # one row of taps per fractional phase p/up; taps cover offsets -half+1 .. half
    cutoff = min(1.0, up / down)
    half = int(math.ceil(SINC_ZEROS / cutoff))
    offsets = np.arange(-half + 1, half + 1)
    frac = np.arange(up)[:, None] / up
    tau = frac - offsets[None, :]
    window = np.where(np.abs(tau) < half, 0.5 + 0.5 * np.cos(np.pi * tau / half), 0.0)
    taps = cutoff * np.sinc(cutoff * tau) * window
    taps /= taps.sum(axis=1, keepdims=True)
    return taps, half


def resample(s: Signal, target_rate: int) -> Signal:
    """Band-limited rate conversion with a Hann-windowed sinc kernel.

    The output has ``round(len * target / source)`` samples. Each polyphase
    row is normalised to unit sum so DC passes unchanged.
    """
    if target_rate <= 0 or int(target_rate) != target_rate:
        raise ValueError(f"target_rate must be a positive integer, got {target_rate}")
    target_rate = int(target_rate)
    if target_rate == s.sample_rate:
        return s

    g = math.gcd(s.sample_rate, target_rate)
    up, down = target_rate // g, s.sample_rate // g
    n_out = int(round(len(s) * target_rate / s.sample_rate))
    taps, half = _phase_table(up, down)

    x = np.concatenate([np.zeros(half), s.samples, np.zeros(half + 1)])
    out = np.empty(n_out)
    width = taps.shape[1]
    chunk = max(1, 2**20 // width)
    for start in range(0, n_out, chunk):
        m = np.arange(start, min(n_out, start + chunk))
        pos = m * down
        base, phase = pos // up, pos % up
        # input sample base + j maps to column j + half - 1 of the tap row
        idx = base[:, None] + np.arange(width)[None, :] + 1
        out[m] = np.einsum("ij,ij->i", x[idx], taps[phase])
    return Signal(out, target_rate)


def synth_sine(freq: float, dur: float, sr: int, amp: float = 1.0, phase: float = 0.0) -> Signal:
    """``amp * sin(2 pi freq n / sr + phase)`` for ``round(dur * sr)`` samples."""
    if freq <= 0 or freq >= sr / 2:
        raise ValueError(f"frequency {freq} Hz aliases at sample rate {sr} Hz")
    n = np.arange(int(round(dur * sr)))
    return Signal(amp * np.sin(2 * np.pi * freq * n / sr + phase), sr)
