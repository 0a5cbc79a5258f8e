"""MIRF v1 binary container and CSV export.

Feature record (all little-endian)::

    b"MIRF" | u8 version=1 | u8 kind | u32 F | u32 T | u32 sample_rate
    F*T float32, row-major
    u8 has_freqs [| F float32]

Feature kinds are 0 stft-mag, 1 mel, 2 cqt, 3 chroma, 4 log.

Parameter files are a concatenation of layer records::

    b"MIRF" | u8 version=1 | u8 kind=10+layer_code | u16 layer_index | u8 n_arrays
    per array: u8 name_len | name (ascii) | u8 ndim | ndim*u32 dims | float32 payload

with layer codes d1=0, d2=1, c1=2, c2=3, r1=4, r2=5.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .timefreq import Spectrogram

MAGIC = b"MIRF"
VERSION = 1
FEATURE_KINDS = {"stft-mag": 0, "mel": 1, "cqt": 2, "chroma": 3, "log": 4}
LAYER_CODES = {"d1": 0, "d2": 1, "c1": 2, "c2": 3, "r1": 4, "r2": 5}
_LAYER_NAMES = {v: k for k, v in LAYER_CODES.items()}

_FEATURE_HEADER = struct.Struct("<4sBBIII")
_LAYER_HEADER = struct.Struct("<4sBBHB")


class MirfError(ValueError):
    pass


def dumps_features(spec: Spectrogram, include_freqs: bool = True) -> bytes:
    F, T = spec.values.shape
    buf = io.BytesIO()
    buf.write(_FEATURE_HEADER.pack(MAGIC, VERSION, FEATURE_KINDS[spec.kind], F, T, spec.sample_rate))
    buf.write(spec.values.astype("<f4").tobytes())
    buf.write(struct.pack("<B", int(include_freqs)))
    if include_freqs:
        buf.write(spec.freqs.astype("<f4").tobytes())
    return buf.getvalue()


def loads_features(data: bytes) -> Spectrogram:
    if len(data) < _FEATURE_HEADER.size:
        raise MirfError("truncated MIRF header")
    magic, version, kind, F, T, sr = _FEATURE_HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise MirfError(f"bad magic {magic!r}")
    if version != VERSION:
        raise MirfError(f"unsupported MIRF version {version}")
    names = {v: k for k, v in FEATURE_KINDS.items()}
    if kind not in names:
        raise MirfError(f"kind code {kind} is not a feature kind")
    pos = _FEATURE_HEADER.size
    end = pos + 4 * F * T
    if len(data) < end:
        raise MirfError("truncated value block")
    values = np.frombuffer(data, "<f4", F * T, pos).reshape(F, T).astype(np.float64)
    freqs = np.arange(F, dtype=np.float64)
    if len(data) > end and data[end]:
        if len(data) < end + 1 + 4 * F:
            raise MirfError("truncated freqs block")
        freqs = np.frombuffer(data, "<f4", F, end + 1).astype(np.float64)
    return Spectrogram(values, freqs, names[kind], sr)


def save_features(path, spec: Spectrogram, include_freqs: bool = True) -> None:
    Path(path).write_bytes(dumps_features(spec, include_freqs))


def load_features(path) -> Spectrogram:
    return loads_features(Path(path).read_bytes())


def save_csv(path, spec: Spectrogram) -> None:
    """Rows are frequency bins; the header row holds frame indices."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin"] + [str(t) for t in range(spec.values.shape[1])])
        for i, row in enumerate(spec.values):
            writer.writerow([str(i)] + [repr(float(v)) for v in row])


def dumps_params(layers) -> bytes:
    """``layers`` is a sequence of (kind, layer_index, [(name, array), ...])."""
    buf = io.BytesIO()
    for kind, index, arrays in layers:
        buf.write(_LAYER_HEADER.pack(MAGIC, VERSION, 10 + LAYER_CODES[kind], index, len(arrays)))
        for name, arr in arrays:
            raw = name.encode("ascii")
            arr = np.asarray(arr)
            buf.write(struct.pack("<B", len(raw)) + raw)
            buf.write(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
            buf.write(arr.astype("<f4").tobytes())
    return buf.getvalue()


def loads_params(data: bytes):
    out = []
    pos = 0
    try:
        while pos < len(data):
            magic, version, code, index, n_arrays = _LAYER_HEADER.unpack_from(data, pos)
            if magic != MAGIC or version != VERSION:
                raise MirfError(f"bad layer record at byte {pos}")
            if code - 10 not in _LAYER_NAMES:
                raise MirfError(f"kind code {code} is not a layer kind")
            pos += _LAYER_HEADER.size
            arrays = []
            for _ in range(n_arrays):
                (name_len,) = struct.unpack_from("<B", data, pos)
                name = data[pos + 1 : pos + 1 + name_len].decode("ascii")
                pos += 1 + name_len
                (ndim,) = struct.unpack_from("<B", data, pos)
                shape = struct.unpack_from(f"<{ndim}I", data, pos + 1)
                pos += 1 + 4 * ndim
                count = int(np.prod(shape))
                if pos + 4 * count > len(data):
                    raise MirfError(f"truncated payload for {name}")
                arrays.append((name, np.frombuffer(data, "<f4", count, pos).reshape(shape).astype(np.float64)))
                pos += 4 * count
            out.append((_LAYER_NAMES[code - 10], index, arrays))
    except struct.error as exc:
        raise MirfError(f"truncated parameter file: {exc}") from exc
    return out


def save_params(path, layers) -> None:
    Path(path).write_bytes(dumps_params(layers))


def load_params(path):
    return loads_params(Path(path).read_bytes())
