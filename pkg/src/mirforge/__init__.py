"""Music-information-retrieval front-end and a from-scratch differentiable network toolkit."""

from .audio import Signal, load_wav, resample, synth_sine, write_wav
from .tensor import Tensor, backward, grad_check, no_grad
from .timefreq import (
    ComplexSpectrogram,
    CqtConfig,
    Spectrogram,
    chromagram,
    cqt,
    cqt_center_freqs,
    hz_to_mel,
    istft,
    magnitude,
    log_compress,
    mel_filterbank,
    melspectrogram,
    standardize,
    stft,
)
from .train import TrainConfig, train
from .zoo import ModelSpec, ZOO

__version__ = "0.1.0"
