"""Time-frequency representations of a short synthetic chord.

Builds a three-note chord, then looks at it through the STFT, a mel
filterbank, a constant-Q transform and the chromagram folded from it.
"""

import numpy as np

from mirforge import Signal, synth_sine
from mirforge.timefreq import (
    CqtConfig,
    chromagram,
    cqt,
    istft,
    interior,
    log_compress,
    magnitude,
    mel_filterbank,
    melspectrogram,
    stft,
)

SR = 16000
PITCH_NAMES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]

# A minor triad: A3, C4, E4
notes = [220.0, 261.63, 329.63]
x = sum(synth_sine(f, 2.0, SR, amp=0.3).samples for f in notes)
chord = Signal(x, SR)

# %% STFT and its inverse
c = stft(chord, n_fft=1024, hop=256)
spec = magnitude(c)
print("stft magnitude:", spec.values.shape)
peak_bins = np.argsort(spec.values.mean(axis=1))[-3:]
print("strongest bins (Hz):", np.sort(spec.freqs[peak_bins]).round(1))

back = istft(c).samples
keep = interior(c.bins.shape[1], 1024, 256)
print("round-trip error on the interior:", np.max(np.abs(back[keep] - x[keep])))

# %% Mel spectrogram
fb = mel_filterbank(1024, SR, n_mels=40)
mel = log_compress(melspectrogram(spec, fb))
print("log-mel:", mel.values.shape, "loudest band peaks at", round(fb.peak_hz[mel.values.mean(1).argmax()]), "Hz")

# %% CQT and chroma
cfg = CqtConfig(f_min=32.70, bins_per_octave=12, n_octaves=5, hop=512)
q = cqt(chord, cfg)
chroma = chromagram(q)
profile = chroma.values.mean(axis=1)
top = np.argsort(profile)[-3:][::-1]
print("cqt:", q.values.shape, " chroma:", chroma.values.shape)
print("dominant pitch classes:", [PITCH_NAMES[i] for i in top])
