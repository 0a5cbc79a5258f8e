import struct

import numpy as np
import pytest

from mirforge import mirf
from mirforge.timefreq import Spectrogram


def _spec(rng, kind="mel"):
    return Spectrogram(rng.uniform(0, 3, (5, 7)), np.linspace(100, 900, 5), kind, 16000)


def test_feature_layout(rng):
    spec = _spec(rng)
    data = mirf.dumps_features(spec)
    magic, version, kind, F, T, sr = struct.unpack_from("<4sBBIII", data)
    assert (magic, version, kind, F, T, sr) == (b"MIRF", 1, 1, 5, 7, 16000)
    values = np.frombuffer(data, "<f4", 35, 18).reshape(5, 7)
    np.testing.assert_array_equal(values, spec.values.astype(np.float32))
    assert data[18 + 140] == 1
    np.testing.assert_array_equal(np.frombuffer(data, "<f4", 5, 159), spec.freqs.astype(np.float32))
    assert len(data) == 18 + 140 + 1 + 20


@pytest.mark.parametrize("kind", ["stft-mag", "mel", "cqt", "chroma", "log"])
def test_feature_round_trip(tmp_path, rng, kind):
    spec = _spec(rng, kind)
    mirf.save_features(tmp_path / "f.mirf", spec)
    back = mirf.load_features(tmp_path / "f.mirf")
    assert back.kind == kind and back.sample_rate == 16000
    np.testing.assert_allclose(back.values, spec.values, rtol=1e-7)
    np.testing.assert_allclose(back.freqs, spec.freqs, rtol=1e-7)


def test_feature_without_freqs(rng):
    back = mirf.loads_features(mirf.dumps_features(_spec(rng), include_freqs=False))
    np.testing.assert_array_equal(back.freqs, np.arange(5))


def test_bad_magic(rng):
    data = b"XXXX" + mirf.dumps_features(_spec(rng))[4:]
    with pytest.raises(mirf.MirfError):
        mirf.loads_features(data)


def test_truncated(rng):
    with pytest.raises(mirf.MirfError):
        mirf.loads_features(mirf.dumps_features(_spec(rng))[:50])


def test_csv(tmp_path, rng):
    spec = _spec(rng)
    mirf.save_csv(tmp_path / "f.csv", spec)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "bin,0,1,2,3,4,5,6"
    assert len(lines) == 6
    np.testing.assert_array_equal([float(v) for v in lines[3].split(",")[1:]], spec.values[2])


def test_params_round_trip(rng):
    layers = [
        ("d2", 0, [("W", rng.standard_normal((4, 6))), ("b", rng.standard_normal(4))]),
        ("r1", 3, [("U", rng.standard_normal((2, 3))), ("W", rng.standard_normal((2, 2)))]),
    ]
    data = mirf.dumps_params(layers)
    magic, version, code, index, n = struct.unpack_from("<4sBBHB", data)
    assert (magic, version, code, index, n) == (b"MIRF", 1, 11, 0, 2)
    back = mirf.loads_params(data)
    assert [(k, i) for k, i, _ in back] == [("d2", 0), ("r1", 3)]
    for (_, _, a), (_, _, b) in zip(layers, back):
        for (na, xa), (nb, xb) in zip(a, b):
            assert na == nb
            np.testing.assert_array_equal(xb, xa.astype(np.float32))


def test_params_truncated(rng):
    data = mirf.dumps_params([("d1", 0, [("W", rng.standard_normal((3, 3)))])])
    with pytest.raises(mirf.MirfError):
        mirf.loads_params(data[:-5])
