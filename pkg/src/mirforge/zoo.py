"""Declarative model specs in the d1/d2/c1/c2/r1/r2/p1/p2 taxonomy, and the six reference builders.

Per-sample shapes move through three layouts:

* vector ``(V,)``
* sequence ``(T, V)``: recurrent input/output, one row per frame
* map ``(C, F, T)``: convolution feature maps

A time extent of ``None`` means "any length". Dense layers flatten maps;
``d1`` on a sequence applies frame-wise while ``d2`` flattens it. Recurrent
layers fold a map into a sequence of ``C * F``-wide frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .layers import Conv1d, Conv2d, Dense, Recurrent, global_avg_pool, maxpool

__all__ = [
    "TAXONOMY",
    "WEIGHT_KINDS",
    "BuildError",
    "LayerSpec",
    "ModelSpec",
    "Model",
    "infer_shapes",
    "receptive_fields",
    "build_dnn_chroma",
    "build_conv2d_voice",
    "build_birnn_voice",
    "build_conv1d_tagger",
    "build_conv2d_tagger",
    "build_crnn",
    "ZOO",
]

TAXONOMY = ("d1", "d2", "c1", "c2", "r1", "r2", "p1", "p2")
WEIGHT_KINDS = {"d1", "d2", "c1", "c2", "r1", "r2"}
KINDS = set(TAXONOMY) | {"global-pool"}


class BuildError(ValueError):
    pass


@dataclass
class LayerSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BuildError(f"unknown layer kind {self.kind!r}")

    def get(self, key, default=None):
        return self.params.get(key, default)

    def to_line(self) -> str:
        return " ".join([self.kind] + [f"{k}={_fmt(v)}" for k, v in self.params.items()])

    @classmethod
    def from_line(cls, line: str) -> "LayerSpec":
        kind, *items = line.split()
        params = {}
        for item in items:
            key, _, value = item.partition("=")
            params[key] = _parse(value)
        return cls(kind, params)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return "x".join(_fmt(i) for i in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _scalar(s: str):
    if s == "true":
        return True
    if s == "false":
        return False
    if s == "none":
        return None
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def _parse(s: str):
    if "x" in s and all(p.lstrip("-").isdigit() or p == "none" for p in s.split("x")):
        return tuple(_scalar(p) for p in s.split("x"))
    return _scalar(s)


@dataclass
class ModelSpec:
    layers: list
    input_shape: tuple
    output_activation: str
    name: str = "model"

    @property
    def kinds(self) -> list[str]:
        return [layer.kind for layer in self.layers]

    @property
    def taxonomy(self) -> str:
        return " - ".join(k for k in self.kinds if k in TAXONOMY)

    @property
    def depth(self) -> int:
        return sum(k in WEIGHT_KINDS for k in self.kinds)

    def to_text(self) -> str:
        head = f"model name={self.name} input={_fmt(tuple(self.input_shape))} output={self.output_activation}"
        return "\n".join([head] + [layer.to_line() for layer in self.layers]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelSpec":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        _, *items = lines[0].split()
        meta = dict(item.partition("=")[::2] for item in items)
        shape = _parse(meta["input"])
        shape = shape if isinstance(shape, tuple) else (shape,)
        return cls([LayerSpec.from_line(ln) for ln in lines[1:]], shape, meta["output"], meta["name"])

    def build(self, seed: int = 0) -> "Model":
        return Model(self, seed)


def _fail(i, layer, msg):
    raise BuildError(f"layer {i} ({layer.kind}): {msg}")


def _conv_out(n, k, s, padding, i, layer):
    if n is None:
        return None
    if padding == "same":
        return -(-n // s)
    if n < k:
        _fail(i, layer, f"kernel extent {k} exceeds input extent {n}")
    return (n - k) // s + 1


def _pool_sizes(layer):
    if layer.kind == "p2":
        return tuple(layer.get("pool", (2, 2)))
    p = layer.get("pool", 2)
    return (p, 1) if layer.get("axis", "time") == "freq" else (1, p)


def _flat(shape, i, layer):
    if any(d is None for d in shape):
        _fail(i, layer, "cannot flatten a variable-length input")
    return int(np.prod(shape))


def infer_shapes(spec: ModelSpec) -> list[tuple]:
    """Per-sample output shape of every layer; raises BuildError on mismatch."""
    shape = tuple(spec.input_shape)
    shapes = []
    for i, layer in enumerate(spec.layers):
        k = layer.kind
        if k in ("d1", "d2"):
            if k == "d1" and len(shape) == 2:
                shape = (shape[0], layer.get("units"))
            else:
                _flat(shape, i, layer)
                shape = (layer.get("units"),)
        elif k in ("c1", "c2"):
            if len(shape) != 3:
                _fail(i, layer, f"convolution needs a (C, F, T) map, got {shape}")
            C, F, T = shape
            if k == "c1":
                kh, kw = F, layer.get("width", 3)
                pads = ("valid", layer.get("padding", "same"))
                stride = (1, layer.get("stride", 1))
            else:
                kh, kw = layer.get("kernel", (3, 3))
                pad = layer.get("padding", "same")
                pads = (pad, pad) if isinstance(pad, str) else pad
                stride = layer.get("stride", (1, 1))
            shape = (layer.get("channels"),
                     _conv_out(F, kh, stride[0], pads[0], i, layer),
                     _conv_out(T, kw, stride[1], pads[1], i, layer))
            if shape[1] == 0 or shape[2] == 0:
                _fail(i, layer, "output extent underflows to zero")
        elif k in ("p1", "p2"):
            if len(shape) != 3:
                _fail(i, layer, f"pooling needs a (C, F, T) map, got {shape}")
            C, F, T = shape
            pf, pt = _pool_sizes(layer)
            if F % pf or (T is not None and T % pt):
                _fail(i, layer, f"pool {pf}x{pt} does not divide {F}x{T}")
            if F // pf == 0 or (T is not None and T // pt == 0):
                _fail(i, layer, "pooled extent underflows to zero")
            shape = (C, F // pf, None if T is None else T // pt)
        elif k in ("r1", "r2"):
            if len(shape) == 3:
                C, F, T = shape
                shape = (T, C * F)
            if len(shape) != 2:
                _fail(i, layer, f"recurrent layer needs a sequence, got {shape}")
            units = layer.get("units", layer.get("hidden"))
            shape = (shape[0], units) if k == "r1" else (units,)
        elif k == "global-pool":
            if len(shape) != 3:
                _fail(i, layer, f"global pooling needs a (C, F, T) map, got {shape}")
            shape = (shape[0],)
        shapes.append(shape)
    return shapes


def receptive_fields(spec: ModelSpec) -> list[tuple[int, int]]:
    """(freq, time) receptive field in input cells after each convolution."""
    rf, jump = [1, 1], [1, 1]
    out = []
    F = spec.input_shape[1]
    for layer in spec.layers:
        if layer.kind in ("c1", "c2"):
            if layer.kind == "c1":
                kernel, stride = (F, layer.get("width", 3)), (1, layer.get("stride", 1))
            else:
                kernel, stride = layer.get("kernel", (3, 3)), layer.get("stride", (1, 1))
            for a in range(2):
                rf[a] += (kernel[a] - 1) * jump[a]
                jump[a] *= stride[a]
            out.append(tuple(rf))
            F = 1 if layer.kind == "c1" else F
        elif layer.kind in ("p1", "p2"):
            pool = _pool_sizes(layer)
            for a in range(2):
                rf[a] += (pool[a] - 1) * jump[a]
                jump[a] *= pool[a]
            F = F // pool[0]
    return out


class Model:
    """Runtime network instantiated from a ModelSpec with seeded weights."""

    def __init__(self, spec: ModelSpec, seed: int = 0):
        self.spec = spec
        self.shapes = infer_shapes(spec)
        rng = np.random.default_rng(seed)
        self.layers = []
        shape = tuple(spec.input_shape)
        last_weight = max(i for i, l in enumerate(spec.layers) if l.kind in WEIGHT_KINDS)
        for i, (ls, out_shape) in enumerate(zip(spec.layers, self.shapes)):
            act = spec.output_activation if i == last_weight else ls.get("activation")
            self.layers.append(self._make(ls, shape, act, rng))
            shape = out_shape

    @staticmethod
    def _make(ls, shape, act, rng):
        k = ls.kind
        if k in ("d1", "d2"):
            width = shape[-1] if (k == "d1" and len(shape) == 2) else int(np.prod(shape))
            return Dense(width, ls.get("units"), act or "relu", rng)
        if k == "c1":
            return Conv1d(shape[0], ls.get("channels"), shape[1], ls.get("width", 3), ls.get("stride", 1),
                          ls.get("padding", "same"), act or "relu", rng)
        if k == "c2":
            return Conv2d(shape[0], ls.get("channels"), ls.get("kernel", (3, 3)), ls.get("stride", (1, 1)),
                          ls.get("padding", "same"), act or "relu", rng)
        if k in ("r1", "r2"):
            v_in = shape[0] * shape[1] if len(shape) == 3 else shape[1]
            hidden = ls.get("hidden")
            return Recurrent(v_in, hidden, ls.get("units", hidden), ls.get("f_h", "tanh"), act or "tanh",
                             many_to_one=(k == "r2"), bidirectional=ls.get("bidirectional", False), rng=rng)
        return None

    def parameters(self) -> list[tuple[str, tn.Tensor]]:
        out = []
        for i, layer in enumerate(self.layers):
            if layer is not None:
                out += [(f"{i}.{n}", p) for n, p in layer.parameters()]
        return out

    @property
    def param_count(self) -> int:
        return sum(p.size for _, p in self.parameters())

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        x = tn.as_tensor(x)
        for ls, layer in zip(self.spec.layers, self.layers):
            k = ls.kind
            if k in ("d1", "d2"):
                if not (k == "d1" and x.ndim == 3):
                    x = tn.reshape(x, (x.shape[0], -1))
                x = layer(x)
            elif k in ("c1", "c2"):
                x = layer(x)
            elif k in ("p1", "p2"):
                x = maxpool(x, _pool_sizes(ls))
            elif k in ("r1", "r2"):
                if x.ndim == 4:
                    B, C, F, T = x.shape
                    x = tn.reshape(tn.transpose(x, (0, 3, 1, 2)), (B, T, C * F))
                x = layer(x)
            elif k == "global-pool":
                x = global_avg_pool(x)
        return x

    def state(self) -> list:
        """(kind, layer_index, [(name, array), ...]) records for serialisation."""
        out = []
        for i, (ls, layer) in enumerate(zip(self.spec.layers, self.layers)):
            if layer is not None:
                out.append((ls.kind, i, [(n, p.data) for n, p in layer.parameters()]))
        return out

    def load_state(self, records) -> None:
        by_index = {i: (kind, arrays) for kind, i, arrays in records}
        for i, (ls, layer) in enumerate(zip(self.spec.layers, self.layers)):
            if layer is None:
                continue
            if i not in by_index or by_index[i][0] != ls.kind:
                raise ValueError(f"no {ls.kind} parameters for layer {i}")
            arrays = dict(by_index[i][1])
            for name, p in layer.parameters():
                if arrays[name].shape != p.shape:
                    raise ValueError(f"layer {i} {name}: shape {arrays[name].shape} != {p.shape}")
                p.data = np.array(arrays[name], dtype=np.float64)


def build_dnn_chroma(F: int, context: int = 15, hidden=(512, 512, 512), n_out: int = 12,
                     output_activation: str = "sigmoid") -> ModelSpec:
    """d2 - d2 - d2 - d1 over a centred window of ``context`` frames."""
    if context % 2 == 0:
        raise BuildError("context must be odd so the window is centred")
    layers = [LayerSpec("d2", {"units": h, "activation": "relu"}) for h in hidden]
    layers.append(LayerSpec("d1", {"units": n_out}))
    spec = ModelSpec(layers, (F, context), output_activation, "dnn-chroma")
    infer_shapes(spec)
    return spec


def build_conv2d_voice(input_shape=(1, 80, 15), channels=(16, 16, 32, 32, 64), dense=(128, 64),
                       pool: int = 2) -> ModelSpec:
    """c2 - c2 - p1 - c2 - c2 - p1 - c2 - p1 - d1 - d1 - d1, one sigmoid output.

    The p1 stages pool along frequency so the short time context is kept.
    """
    c = [LayerSpec("c2", {"channels": ch, "kernel": (3, 3), "padding": "same", "activation": "relu"})
         for ch in channels]
    p = lambda: LayerSpec("p1", {"pool": pool, "axis": "freq"})  # noqa: E731
    layers = [c[0], c[1], p(), c[2], c[3], p(), c[4], p()]
    layers += [LayerSpec("d1", {"units": u, "activation": "relu"}) for u in dense]
    layers.append(LayerSpec("d1", {"units": 1}))
    spec = ModelSpec(layers, tuple(input_shape), "sigmoid", "conv2d-voice")
    infer_shapes(spec)
    return spec


def build_birnn_voice(V_in: int, V_h: int = 16) -> ModelSpec:
    """r1 - r1 - d1 with bidirectional many-to-many recurrences and a frame-wise sigmoid."""
    r = lambda: LayerSpec("r1", {"hidden": V_h, "units": V_h, "bidirectional": True,  # noqa: E731
                                 "activation": "tanh"})
    layers = [r(), r(), LayerSpec("d1", {"units": 1})]
    return ModelSpec(layers, (None, V_in), "sigmoid", "birnn-voice")


def build_conv1d_tagger(F: int, n_tags: int, T: int = 16, channels=(16, 32), width: int = 3,
                        pool: int = 2, dense=(64, 64), output_activation: str = "sigmoid") -> ModelSpec:
    """c1 - p1 - c1 - p1 - d1 - d1 - d1, pooling along time only."""
    layers = []
    for ch in channels:
        layers.append(LayerSpec("c1", {"channels": ch, "width": width, "padding": "same", "activation": "relu"}))
        layers.append(LayerSpec("p1", {"pool": pool, "axis": "time"}))
    layers += [LayerSpec("d1", {"units": u, "activation": "relu"}) for u in dense]
    layers.append(LayerSpec("d1", {"units": n_tags}))
    spec = ModelSpec(layers, (1, F, T), output_activation, "conv1d-tagger")
    infer_shapes(spec)
    return spec


def build_conv2d_tagger(F: int, n_tags: int, T: int = 16, channels=(16, 32, 64), pool=(2, 2),
                        output_activation: str = "sigmoid") -> ModelSpec:
    """c2 - p2 - c2 - p2 - c2 - p2 - d2 with a flattened sigmoid head."""
    layers = []
    for ch in channels:
        layers.append(LayerSpec("c2", {"channels": ch, "kernel": (3, 3), "padding": "same", "activation": "relu"}))
        layers.append(LayerSpec("p2", {"pool": tuple(pool)}))
    layers.append(LayerSpec("d2", {"units": n_tags}))
    spec = ModelSpec(layers, (1, F, T), output_activation, "conv2d-tagger")
    infer_shapes(spec)
    return spec


def build_crnn(F: int, n_tags: int, channels=(16, 32), pool=(2, 2), hidden: int = 32,
               output_activation: str = "sigmoid") -> ModelSpec:
    """c2 - p2 - c2 - p2 - r1 - r2 - d1; the many-to-one r2 makes one prediction per clip."""
    layers = []
    for ch in channels:
        layers.append(LayerSpec("c2", {"channels": ch, "kernel": (3, 3), "padding": "same", "activation": "relu"}))
        layers.append(LayerSpec("p2", {"pool": tuple(pool)}))
    layers.append(LayerSpec("r1", {"hidden": hidden, "units": hidden, "activation": "tanh"}))
    layers.append(LayerSpec("r2", {"hidden": hidden, "units": hidden, "activation": "tanh"}))
    layers.append(LayerSpec("d1", {"units": n_tags}))
    spec = ModelSpec(layers, (1, F, None), output_activation, "crnn")
    infer_shapes(spec)
    return spec


ZOO = {
    "dnn-chroma": build_dnn_chroma,
    "conv2d-voice": build_conv2d_voice,
    "birnn-voice": build_birnn_voice,
    "conv1d-tagger": build_conv1d_tagger,
    "conv2d-tagger": build_conv2d_tagger,
    "crnn": build_crnn,
}
