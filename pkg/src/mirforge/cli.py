"""``mirforge`` command line: extract, gradcheck, train, eval.

Exit codes: 0 success, 1 verification failure, 2 divergence, 3 argument or I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import mirf
from .audio import load_wav, resample
from .gradcheck import TOLERANCE, run_suite
from .tasks import COMPATIBLE, TASKS, prepare
from .timefreq import CqtConfig, chromagram, cqt, log_compress, magnitude, mel_filterbank, melspectrogram, stft
from .train import DivergenceError, TrainConfig, evaluate, train
from .zoo import ZOO

EXIT_OK, EXIT_VERIFY, EXIT_DIVERGED, EXIT_USAGE = 0, 1, 2, 3


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, OSError) as exc:
        raise StageError(name, exc) from exc


def cmd_extract(args) -> int:
    if args.kind not in ("cqt", "chroma") and (args.beta is not None or args.octaves is not None):
        raise StageError("arguments", "--beta/--octaves only apply to cqt and chroma")
    if args.kind != "mel" and args.n_mels is not None:
        raise StageError("arguments", "--n-mels only applies to mel")
    beta = 12 if args.beta is None else args.beta
    octaves = 5 if args.octaves is None else args.octaves

    sig = _stage("load", load_wav, args.input)
    sig = _stage("resample", resample, sig, args.sr)
    if args.kind in ("stft", "mel"):
        spec = _stage("stft", lambda: magnitude(stft(sig, args.n_fft, args.hop, args.window)))
        if args.kind == "mel":
            fb = _stage("mel", mel_filterbank, args.n_fft, args.sr, args.n_mels or 40, 0.0, args.sr / 2)
            spec = _stage("mel", melspectrogram, spec, fb)
    else:
        cfg = _stage("cqt", CqtConfig, args.f_min, beta, octaves, args.hop)
        spec = _stage("cqt", cqt, sig, cfg)
        if args.kind == "chroma":
            spec = _stage("chroma", chromagram, spec, beta)
    if args.log:
        spec = _stage("log", log_compress, spec, args.eps)

    if args.format == "csv":
        _stage("write", mirf.save_csv, args.output, spec)
    else:
        _stage("write", mirf.save_features, args.output, spec)
    F, T = spec.values.shape
    print(f"{spec.kind} {F}×{T}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_suite(args.seed)
    failed = []
    for name, err in results.items():
        ok = err < args.tol
        print(f"{name:24s} {err:.3e}  {'ok' if ok else 'FAIL'}")
        if not ok:
            failed.append(name)
    if failed:
        print("gradient check failed: " + ", ".join(failed))
        return EXIT_VERIFY
    return EXIT_OK


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("MIRFORGE_SEED", "0"))


def _prepared(args, seed):
    if args.task not in TASKS:
        raise StageError("arguments", f"unknown task {args.task!r}")
    if args.model not in COMPATIBLE[args.task]:
        raise StageError("arguments", f"model {args.model!r} does not fit task {args.task!r}")
    data = TASKS[args.task](seed).generate()
    return prepare(args.model, data, args.task)


def cmd_train(args) -> int:
    seed = _seed(args)
    prep = _prepared(args, seed)
    cfg = _stage("arguments", TrainConfig, prep.loss, args.optimizer, args.lr, args.epochs, args.batch_size, seed)
    model = prep.spec.build(seed)
    try:
        history = train(model, (prep.x_train, prep.y_train), cfg, (prep.x_test, prep.y_test))
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    out = Path(args.out)
    _stage("write", out.mkdir, parents=True, exist_ok=True)
    _stage("write", history.to_csv, out / "history.csv")
    _stage("write", mirf.save_params, out / "params.mirf", model.state())
    _stage("write", (out / "model.spec").write_text, prep.spec.to_text())
    metric = history.final["val_metric"] if history.rows else evaluate(model, prep.x_test, prep.y_test, prep.loss)[1]
    print(f"test accuracy {metric:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    seed = _seed(args)
    prep = _prepared(args, seed)
    model = prep.spec.build(seed)
    _stage("load", model.load_state, _stage("load", mirf.load_params, args.params))
    loss, metric = evaluate(model, prep.x_test, prep.y_test, prep.loss)
    print(f"test loss {loss:.6f}")
    print(f"test accuracy {metric:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mirforge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ex = sub.add_parser("extract", help="compute a time-frequency representation of a WAV file")
    ex.add_argument("input")
    ex.add_argument("-o", "--output", required=True)
    ex.add_argument("--kind", choices=["stft", "mel", "cqt", "chroma"], default="mel")
    ex.add_argument("--sr", type=int, default=16000)
    ex.add_argument("--n-fft", type=int, default=512)
    ex.add_argument("--hop", type=int, default=256)
    ex.add_argument("--window", choices=["hann", "rect"], default="hann")
    ex.add_argument("--n-mels", type=int, default=None, help="default 40")
    ex.add_argument("--f-min", type=float, default=32.70)
    ex.add_argument("--beta", type=int, default=None, help="bins per octave, default 12")
    ex.add_argument("--octaves", type=int, default=None, help="default 5")
    ex.add_argument("--log", action="store_true", help="apply log(x + eps)")
    ex.add_argument("--eps", type=float, default=1e-7)
    ex.add_argument("--format", choices=["mirf", "csv"], default="mirf")
    ex.set_defaults(func=cmd_extract)

    gc = sub.add_parser("gradcheck", help="finite-difference check of every layer and loss")
    gc.add_argument("--tol", type=float, default=TOLERANCE)
    gc.add_argument("--seed", type=int, default=0)
    gc.set_defaults(func=cmd_gradcheck)

    for name, func in (("train", cmd_train), ("eval", cmd_eval)):
        sp = sub.add_parser(name)
        sp.add_argument("--model", choices=sorted(ZOO), required=True)
        sp.add_argument("--task", choices=sorted(TASKS), required=True)
        sp.add_argument("--seed", type=int, default=None, help="falls back to $MIRFORGE_SEED, then 0")
        sp.set_defaults(func=func)
    tr = sub.choices["train"]
    tr.add_argument("--epochs", type=int, default=50)
    tr.add_argument("--lr", type=float, default=0.01)
    tr.add_argument("--optimizer", choices=["sgd", "adam"], default="sgd")
    tr.add_argument("--batch-size", type=int, default=16)
    tr.add_argument("--out", default=".")
    sub.choices["eval"].add_argument("--params", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
