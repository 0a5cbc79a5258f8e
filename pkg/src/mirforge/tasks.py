"""Synthetic desk-scale tasks and the glue that turns them into model inputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .audio import Signal
from .timefreq import magnitude, mel_filterbank, melspectrogram, stft
from . import zoo

__all__ = [
    "SyntheticTask",
    "TaskData",
    "Prepared",
    "make_pitch_task",
    "make_voice_task",
    "voice_clip",
    "nearest_neighbor_accuracy",
    "band_energy_accuracy",
    "prepare",
    "TASKS",
    "COMPATIBLE",
]

PITCH_SR = 4000
PITCH_NFFT = 512
PITCH_HOP = 128
PITCH_FRAMES = 16
PITCH_BINS = 256  # bins above index 255 (the Nyquist bin) are dropped
PITCH_BASE_HZ = 220.0

VOICE_SR = 8000
VOICE_NFFT = 256
VOICE_HOP = 128
VOICE_MELS = 40
VOICE_DUR = 1.5
VOICE_BAND = (800.0, 3000.0)


@dataclass
class TaskData:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    freqs: np.ndarray


@dataclass
class SyntheticTask:
    name: str
    kind: str  # "time-varying" or "time-invariant"
    metric: str  # "accuracy" or "frame-accuracy"
    seed: int
    generator: Callable[[int], TaskData]

    def generate(self) -> TaskData:
        return self.generator(self.seed)


def _pitch_features(samples: np.ndarray) -> np.ndarray:
    spec = stft(Signal(samples, PITCH_SR), PITCH_NFFT, PITCH_HOP, "hann")
    return np.abs(spec.bins[:PITCH_BINS])


def _pitch_data(seed: int, n_train: int = 50, n_test: int = 10) -> TaskData:
    rng = np.random.default_rng(seed)
    n = (PITCH_FRAMES - 1) * PITCH_HOP + PITCH_NFFT
    t = np.arange(n) / PITCH_SR

    def draw(per_class):
        labels = np.repeat(np.arange(12), per_class)
        feats = np.empty((len(labels), PITCH_BINS, PITCH_FRAMES))
        for i, p in enumerate(labels):
            f0 = PITCH_BASE_HZ * 2.0 ** (p / 12)
            amp = 10.0 ** (rng.uniform(-20.0, 0.0) / 20.0)
            x = amp * np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
            x += 0.003 * rng.standard_normal(n)
            feats[i] = _pitch_features(x)
        return feats, labels

    x_train, y_train = draw(n_train)
    x_test, y_test = draw(n_test)
    freqs = np.arange(PITCH_BINS) * PITCH_SR / PITCH_NFFT
    return TaskData(x_train, y_train, x_test, y_test, freqs)


def make_pitch_task(seed: int = 0) -> SyntheticTask:
    """Twelve chromatic sine pitches from 220 Hz, random phase and a 20 dB amplitude spread.

    Features are Hann-window STFT magnitudes (256 bins x 16 frames at 4 kHz);
    labels are pitch classes, 50 train and 10 test clips per class.
    """
    return SyntheticTask("pitch", "time-invariant", "accuracy", seed, _pitch_data)


def voice_clip(rng, dur: float = VOICE_DUR, noise_only: bool = False):
    """One clip with alternating voiced / unvoiced segments and per-sample labels.

    Voiced segments are vibrato tones with eight harmonics; unvoiced segments
    are steady pure tones. Both sit on a white-noise floor.
    """
    n = int(round(dur * VOICE_SR))
    x = 0.02 * rng.standard_normal(n)
    labels = np.zeros(n, dtype=np.int64)
    if noise_only:
        return x, labels
    n_seg = int(rng.integers(3, 7))
    cuts = np.sort(rng.choice(np.arange(1, 20), n_seg - 1, replace=False)) * n // 20
    bounds = np.concatenate([[0], cuts, [n]])
    voiced = bool(rng.integers(2))
    for a, b in zip(bounds[:-1], bounds[1:]):
        t = np.arange(b - a) / VOICE_SR
        if voiced:
            f0 = rng.uniform(150, 400)
            rate, depth = rng.uniform(5, 7), rng.uniform(0.03, 0.06)
            phase = 2 * np.pi * np.cumsum(f0 * (1 + depth * np.sin(2 * np.pi * rate * t))) / VOICE_SR
            seg = sum(np.sin(k * phase) / k for k in range(1, 9))
            x[a:b] += 0.3 * seg / 2.0
            labels[a:b] = 1
        else:
            f = rng.uniform(100, 400)
            x[a:b] += 0.3 * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        voiced = not voiced
    return x, labels


def _frame_labels(labels: np.ndarray, n_frames: int) -> np.ndarray:
    centres = np.arange(n_frames) * VOICE_HOP + VOICE_NFFT // 2
    return labels[centres]


def _voice_data(seed: int, n_train: int = 24, n_test: int = 8) -> TaskData:
    rng = np.random.default_rng(seed)
    fb = mel_filterbank(VOICE_NFFT, VOICE_SR, VOICE_MELS, 0.0, VOICE_SR / 2)

    def draw(count):
        feats, labels = [], []
        for _ in range(count):
            x, lab = voice_clip(rng)
            mel = melspectrogram(magnitude(stft(Signal(x, VOICE_SR), VOICE_NFFT, VOICE_HOP)), fb)
            feats.append(mel.values)
            labels.append(_frame_labels(lab, mel.values.shape[1]))
        return np.stack(feats), np.stack(labels)

    x_train, y_train = draw(n_train)
    x_test, y_test = draw(n_test)
    return TaskData(x_train, y_train, x_test, y_test, fb.peak_hz)


def make_voice_task(seed: int = 0) -> SyntheticTask:
    """Frame-level voiced/unvoiced detection on 1.5 s clips (40-band mel, 8 kHz)."""
    return SyntheticTask("voice", "time-varying", "frame-accuracy", seed, _voice_data)


TASKS = {"pitch": make_pitch_task, "voice": make_voice_task}


def nearest_neighbor_accuracy(data: TaskData) -> float:
    """1-NN on time-averaged spectra scaled to unit norm (removes the amplitude spread)."""
    def embed(x):
        v = x.mean(axis=-1)
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    a, b = embed(data.x_train), embed(data.x_test)
    d = (b * b).sum(1)[:, None] - 2 * b @ a.T + (a * a).sum(1)[None, :]
    pred = data.y_train[np.argmin(d, axis=1)]
    return float(np.mean(pred == data.y_test))


def band_energy_accuracy(data: TaskData, band=VOICE_BAND) -> float:
    """Frame accuracy of thresholding mel energy in ``band``; threshold fit on train."""
    rows = (data.freqs >= band[0]) & (data.freqs <= band[1])

    def energy(x):
        return np.log(x[:, rows, :].sum(axis=1) + 1e-10).ravel()

    e_train, y_train = energy(data.x_train), data.y_train.ravel()
    candidates = np.unique(e_train)
    best = max(candidates, key=lambda c: np.mean((e_train >= c) == y_train))
    return float(np.mean((energy(data.x_test) >= best) == data.y_test.ravel()))


@dataclass
class Prepared:
    spec: zoo.ModelSpec
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    loss: str
    mean: float
    std: float


COMPATIBLE = {
    "pitch": ("dnn-chroma", "conv1d-tagger", "conv2d-tagger", "crnn"),
    "voice": ("conv2d-voice", "birnn-voice"),
}


def _log_standardize(train, test, eps=1e-7):
    lt, ls = np.log(train + eps), np.log(test + eps)
    mean = float(lt.mean())
    std = max(float(lt.std()), 1e-8)
    return (lt - mean) / std, (ls - mean) / std, mean, std


def _excerpts(feats, labels, width, step):
    half = width // 2
    xs, ys = [], []
    for f, lab in zip(feats, labels):
        for t in range(half, f.shape[1] - half, step):
            xs.append(f[None, :, t - half : t + half + 1])
            ys.append([lab[t]])
    return np.stack(xs), np.asarray(ys, dtype=np.float64)


def prepare(model_name: str, data: TaskData, task: str, **builder_kwargs) -> Prepared:
    """Log-compress, standardise (train statistics), reshape and build the matching spec."""
    if model_name not in COMPATIBLE.get(task, ()):
        raise ValueError(f"model {model_name!r} does not fit task {task!r}; choose from {COMPATIBLE.get(task)}")
    xtr, xte, mean, std = _log_standardize(data.x_train, data.x_test)
    F = xtr.shape[1]

    if task == "pitch":
        ytr, yte = np.eye(12)[data.y_train], np.eye(12)[data.y_test]
        if model_name == "dnn-chroma":
            context = builder_kwargs.pop("context", 15)
            mid = xtr.shape[2] // 2
            window = slice(mid - context // 2, mid + context // 2 + 1)
            spec = zoo.build_dnn_chroma(F, context, **builder_kwargs)
            xtr, xte = xtr[:, :, window], xte[:, :, window]
        else:
            T = xtr.shape[2]
            if model_name == "crnn":
                spec = zoo.build_crnn(F, 12, **builder_kwargs)
            else:
                spec = zoo.ZOO[model_name](F, 12, T=T, **builder_kwargs)
            xtr, xte = xtr[:, None], xte[:, None]
        return Prepared(spec, xtr, ytr, xte, yte, "binary-xent", mean, std)

    if model_name == "conv2d-voice":
        width = builder_kwargs.pop("context", 15)
        step = builder_kwargs.pop("step", 2)
        spec = zoo.build_conv2d_voice((1, F, width), **builder_kwargs)
        xtr_, ytr = _excerpts(xtr, data.y_train, width, step)
        xte_, yte = _excerpts(xte, data.y_test, width, step)
        return Prepared(spec, xtr_, ytr, xte_, yte, "binary-xent", mean, std)

    spec = zoo.build_birnn_voice(F, **builder_kwargs)
    ytr = data.y_train[..., None].astype(np.float64)
    yte = data.y_test[..., None].astype(np.float64)
    return Prepared(spec, xtr.transpose(0, 2, 1), ytr, xte.transpose(0, 2, 1), yte, "binary-xent", mean, std)
