"""Time-frequency representations: STFT, mel, CQT and chroma, plus log/standardise."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio import Signal

__all__ = [
    "KINDS",
    "ComplexSpectrogram",
    "Spectrogram",
    "CqtConfig",
    "MelFilterbank",
    "get_window",
    "stft",
    "istft",
    "interior",
    "magnitude",
    "hz_to_mel",
    "mel_to_hz",
    "mel_filterbank",
    "melspectrogram",
    "cqt_center_freqs",
    "cqt",
    "chromagram",
    "log_compress",
    "standardize",
    "apply_standardize",
]

KINDS = ("stft-mag", "mel", "cqt", "chroma", "log")
_INCREASING = {"stft-mag", "mel", "cqt"}


def get_window(name: str, n: int) -> np.ndarray:
    """Periodic Hann or rectangular window of length ``n``."""
    if name == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    if name == "rect":
        return np.ones(n)
    raise ValueError(f"unknown window {name!r}")


@dataclass(frozen=True, eq=False)
class ComplexSpectrogram:
    bins: np.ndarray  # (F, T) complex
    sample_rate: int
    n_fft: int
    hop: int
    window: str = "hann"

    def __post_init__(self):
        if self.bins.ndim != 2 or self.bins.shape[0] != self.n_fft // 2 + 1:
            raise ValueError(f"expected {self.n_fft // 2 + 1} frequency rows, got shape {self.bins.shape}")
        if not np.all(np.isfinite(self.bins)):
            raise ValueError("non-finite spectrogram entries")

    @property
    def shape(self):
        return self.bins.shape

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.n_fft // 2 + 1) * self.sample_rate / self.n_fft

    def __mul__(self, c):
        return ComplexSpectrogram(self.bins * c, self.sample_rate, self.n_fft, self.hop, self.window)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Real (F, T) grid with per-row centre frequencies."""

    values: np.ndarray
    freqs: np.ndarray
    kind: str
    sample_rate: int
    hop: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        freqs = np.asarray(self.freqs, dtype=np.float64)
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if values.ndim != 2 or freqs.shape != (values.shape[0],):
            raise ValueError(f"values {values.shape} and freqs {freqs.shape} disagree")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite spectrogram values")
        if self.kind != "log" and np.any(values < 0):
            raise ValueError(f"{self.kind} spectrogram must be non-negative")
        if self.kind in _INCREASING and np.any(np.diff(freqs) <= 0):
            raise ValueError("frequency axis must be strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "freqs", freqs)

    @property
    def shape(self):
        return self.values.shape

    def replace(self, **changes) -> "Spectrogram":
        fields = dict(values=self.values, freqs=self.freqs, kind=self.kind,
                      sample_rate=self.sample_rate, hop=self.hop)
        fields.update(changes)
        return Spectrogram(**fields)


def _check_fft_size(n_fft: int):
    if n_fft <= 0 or n_fft & (n_fft - 1):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")


def stft(s: Signal, n_fft: int = 512, hop: int = 256, window: str = "hann") -> ComplexSpectrogram:
    """One-sided STFT without padding; frame t starts at sample ``t * hop``."""
    _check_fft_size(n_fft)
    if not 0 < hop <= n_fft:
        raise ValueError(f"hop must satisfy 0 < hop <= n_fft, got {hop}")
    if n_fft > len(s):
        raise ValueError(f"input too short: {len(s)} samples for n_fft={n_fft}")
    frames = sliding_window_view(s.samples, n_fft)[::hop]
    bins = np.fft.rfft(frames * get_window(window, n_fft), axis=1).T
    return ComplexSpectrogram(bins, s.sample_rate, n_fft, hop, window)


def interior(n_frames: int, n_fft: int, hop: int) -> slice:
    """Samples of an ``istft`` output covered by the full overlap depth."""
    return slice(n_fft - hop, (n_frames - 1) * hop + hop)


def istft(c: ComplexSpectrogram, window: str | None = None) -> Signal:
    """Weighted overlap-add inverse with least-squares window normalisation.

    Raises ``ValueError`` if the summed squared window vanishes anywhere in the
    interior region; outside it, samples with no window support are zero.
    """
    window = c.window if window is None else window
    n_fft, hop = c.n_fft, c.hop
    n_frames = c.bins.shape[1]
    w = get_window(window, n_fft)
    frames = np.fft.irfft(c.bins.T, n=n_fft, axis=1) * w

    length = (n_frames - 1) * hop + n_fft
    out = np.zeros(length)
    norm = np.zeros(length)
    for t in range(n_frames):
        out[t * hop : t * hop + n_fft] += frames[t]
        norm[t * hop : t * hop + n_fft] += w * w

    floor = 1e-10 * norm.max()
    if np.any(norm[interior(n_frames, n_fft, hop)] <= floor):
        raise ValueError(f"window {window!r} with hop {hop} leaves zero overlap-add weight in the interior")
    ok = norm > floor
    out[ok] /= norm[ok]
    out[~ok] = 0.0
    return Signal(out, c.sample_rate)


def magnitude(c: ComplexSpectrogram) -> Spectrogram:
    return Spectrogram(np.abs(c.bins), c.freqs, "stft-mag", c.sample_rate, c.hop)


def hz_to_mel(f):
    """2595 * log10(1 + f / 700)."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    m = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(m) if m.ndim == 0 else m


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(f) if f.ndim == 0 else f


@dataclass(frozen=True, eq=False)
class MelFilterbank:
    """Triangular filter weights (n_mels, F) and the Hz position of each peak."""

    weights: np.ndarray
    peak_hz: np.ndarray
    empty_rows: tuple = field(default=())

    @property
    def shape(self):
        return self.weights.shape

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)


def mel_filterbank(n_fft: int, sr: int, n_mels: int = 40, f_lo: float = 0.0, f_hi: float | None = None) -> MelFilterbank:
    """Peak-normalised triangles centred at mel-uniform points in [f_lo, f_hi].

    The first and last peaks sit at ``f_lo`` and ``f_hi``; each triangle's feet
    lie one mel step either side of its peak.
    """
    f_hi = sr / 2 if f_hi is None else f_hi
    if not 0 <= f_lo < f_hi <= sr / 2:
        raise ValueError(f"need 0 <= f_lo < f_hi <= {sr / 2}, got {f_lo}, {f_hi}")
    if n_mels < 2:
        raise ValueError("n_mels must be at least 2")
    lo, hi = hz_to_mel(f_lo), hz_to_mel(f_hi)
    step = (hi - lo) / (n_mels - 1)
    peaks_mel = lo + step * np.arange(n_mels)
    edges_mel = lo + step * np.arange(-1, n_mels + 1)
    edges = 700.0 * (10.0 ** (edges_mel / 2595.0) - 1.0)  # left foot may be negative Hz

    fft_freqs = np.arange(n_fft // 2 + 1) * sr / n_fft
    left, centre, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rise = (fft_freqs - left) / (centre - left)
    fall = (right - fft_freqs) / (right - centre)
    weights = np.maximum(0.0, np.minimum(rise, fall))

    peak = weights.max(axis=1)
    empty = tuple(int(i) for i in np.flatnonzero(peak == 0))
    if empty:
        warnings.warn(f"{len(empty)} mel filters fall between FFT bins and are empty", RuntimeWarning, stacklevel=2)
    weights[peak > 0] /= peak[peak > 0, None]
    return MelFilterbank(weights, mel_to_hz(peaks_mel), empty)


def melspectrogram(mag: Spectrogram, fb: MelFilterbank) -> Spectrogram:
    weights = np.asarray(fb)
    if weights.shape[1] != mag.values.shape[0]:
        raise ValueError(f"filterbank expects {weights.shape[1]} bins, spectrogram has {mag.values.shape[0]}")
    return Spectrogram(weights @ mag.values, fb.peak_hz, "mel", mag.sample_rate, mag.hop)


@dataclass(frozen=True)
class CqtConfig:
    f_min: float = 32.70
    bins_per_octave: int = 12
    n_octaves: int = 5
    hop: int = 256

    def __post_init__(self):
        if self.f_min <= 0 or self.bins_per_octave < 1 or self.n_octaves < 1 or self.hop < 1:
            raise ValueError(f"invalid CQT configuration {self}")

    @property
    def n_bins(self) -> int:
        return self.bins_per_octave * self.n_octaves

    @property
    def q(self) -> float:
        return 1.0 / (2.0 ** (1.0 / self.bins_per_octave) - 1.0)


def cqt_center_freqs(cfg: CqtConfig) -> np.ndarray:
    k = np.arange(cfg.n_bins)
    return cfg.f_min * 2.0 ** (k / cfg.bins_per_octave)


def cqt_window_lengths(cfg: CqtConfig, sr: int) -> np.ndarray:
    return np.ceil(cfg.q * sr / cqt_center_freqs(cfg)).astype(int)


def cqt(s: Signal, cfg: CqtConfig) -> Spectrogram:
    """Constant-Q magnitudes by direct inner products with windowed exponentials.

    Every bin's kernel is centred on the same instant per frame, so frames are
    spaced by ``cfg.hop`` and the longest (lowest) kernel must fit the signal.
    Kernels are divided by their window sum, so a unit sinusoid at a centre
    frequency gives a magnitude close to 0.5 in every bin.
    """
    sr = s.sample_rate
    if cfg.f_min * 2.0**cfg.n_octaves >= sr / 2:
        raise ValueError(f"top CQT bin exceeds Nyquist at {sr} Hz")
    freqs = cqt_center_freqs(cfg)
    lengths = cqt_window_lengths(cfg, sr)
    longest = int(lengths.max())
    if longest > len(s):
        raise ValueError(f"input too short: lowest CQT bin needs {longest} samples, signal has {len(s)}")

    n_frames = (len(s) - longest) // cfg.hop + 1
    centre = longest // 2
    out = np.empty((len(freqs), n_frames))
    for k, (fk, nk) in enumerate(zip(freqs, lengths)):
        n = np.arange(nk)
        w = get_window("hann", nk)
        kernel = w * np.exp(-2j * np.pi * fk * n / sr) / w.sum()
        start = centre - nk // 2
        frames = sliding_window_view(s.samples[start:], nk)[: (n_frames - 1) * cfg.hop + 1 : cfg.hop]
        out[k] = np.abs(frames @ kernel)
    return Spectrogram(out, freqs, "cqt", sr, cfg.hop)


def chromagram(cqt_spec: Spectrogram, bins_per_octave: int = 12) -> Spectrogram:
    """Fold octaves: chroma[b] = sum over z of |cqt[b + z * bins_per_octave]|."""
    n_bins, n_frames = cqt_spec.values.shape
    if n_bins % bins_per_octave:
        raise ValueError(f"{n_bins} CQT bins is not a multiple of {bins_per_octave}")
    folded = np.abs(cqt_spec.values).reshape(n_bins // bins_per_octave, bins_per_octave, n_frames)
    chroma = np.zeros((bins_per_octave, n_frames))
    for octave in folded:
        chroma += octave
    return Spectrogram(chroma, np.arange(bins_per_octave, dtype=np.float64), "chroma",
                       cqt_spec.sample_rate, cqt_spec.hop)


def log_compress(spec: Spectrogram, eps: float = 1e-7) -> Spectrogram:
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return spec.replace(values=np.log(spec.values + eps), kind="log")


def apply_standardize(values, mean: float, std: float):
    return (np.asarray(values, dtype=np.float64) - mean) / std


def standardize(spec: Spectrogram) -> tuple[Spectrogram, float, float]:
    """Zero-mean, unit-variance over all cells; std is floored at 1e-8."""
    mean = float(spec.values.mean())
    std = max(float(spec.values.std()), 1e-8)
    return spec.replace(values=apply_standardize(spec.values, mean, std), kind="log"), mean, std
