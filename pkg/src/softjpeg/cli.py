"""Command-line front end: ``softjpeg <subcommand> ...``.

Exit codes: 0 on success, 1 on a runtime failure (message on stderr),
2 on a usage error. Flags and the optional ``--config`` file are validated
before any file is read or written.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .errors import SoftJpegError
from .graph_prior import KINDS

THREADS_ENV = "SOFTJPEG_THREADS"
IMAGE_SUFFIXES = (".pgm", ".png", ".bmp", ".tif", ".tiff")
SIGNALS = ("pws", "pwc", "constant")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config file

def _parse_value(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null", ""):
        return None
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t.strip("\"'")


def read_config(path: str | Path) -> dict:
    """Flat ``key = value`` pairs; ``#`` starts a comment and ``qp.<field>`` sets a QP option."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _parse_value(value)
    return out


def solver_config(settings: dict):
    """Build a SolverConfig from flat settings, rejecting unknown keys."""
    from .qp import QpConfig
    from .soft_decoder import SolverConfig

    names = {f.name for f in fields(SolverConfig)} - {"qp"}
    qp_names = {f.name for f in fields(QpConfig)}
    top, qp = {}, {}
    for key, value in settings.items():
        if key.startswith("qp.") and key[3:] in qp_names:
            qp[key[3:]] = value
        elif key in names:
            top[key] = value
        else:
            raise UsageError(f"unknown config key {key!r}")
    try:
        return SolverConfig(qp=QpConfig(**qp), **top)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid solver settings: {exc}") from exc


# ---------------------------------------------------------------- argument parsing

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _quality(text: str) -> int:
    v = int(text)
    if not 1 <= v <= 100:
        raise argparse.ArgumentTypeError(f"quality factor must be in 1..100, got {text}")
    return v


def _quality_list(text: str) -> list[int]:
    try:
        return [_quality(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad quality list {text!r}") from exc


def _nonneg(text: str) -> float:
    v = float(text)
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"expected a finite value >= 0, got {text}")
    return v


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return _positive_int(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or the CPU count); never changes results")
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    common.add_argument("--config", type=Path, default=None, help="flat key = value solver settings")

    p = argparse.ArgumentParser(prog="softjpeg", description="JPEG soft decoding with sparse and graph priors")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("encode", parents=[common], help="compress a grayscale image to baseline JPEG")
    s.add_argument("--in", dest="input", type=Path, required=True)
    s.add_argument("--qf", type=_quality, required=True)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("decode", parents=[common], help="hard or MMSE decode a JPEG to PGM")
    s.add_argument("--in", dest="input", type=Path, required=True)
    s.add_argument("--mode", choices=("hard", "mmse"), default="hard")
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("soft-decode", parents=[common], help="soft decode a JPEG to PGM")
    s.add_argument("--in", dest="input", type=Path, required=True)
    s.add_argument("--dict", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--lambda1", type=_nonneg, default=None)
    s.add_argument("--lambda2", type=_nonneg, default=None, help="base smoothness weight")
    s.add_argument("--iters", type=_positive_int, default=None, help="outer iterations")
    s.add_argument("--regularizer", choices=KINDS, default=None)
    s.add_argument("--sigma1", type=_nonneg, default=None)
    s.add_argument("--sigma2", type=_nonneg, default=None)
    s.add_argument("--report", type=Path, default=None, help="write the solver report as JSON")

    s = sub.add_parser("train-dict", parents=[common], help="learn a patch dictionary with K-SVD")
    s.add_argument("--corpus", type=Path, required=True, help="directory of grayscale images")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--atoms", type=_positive_int, default=400)
    s.add_argument("--sparsity", type=_positive_int, default=8)
    s.add_argument("--iters", type=_positive_int, default=30)
    s.add_argument("--patch", type=_positive_int, default=10)
    s.add_argument("--patches", type=_positive_int, default=10000, help="training patches to sample")
    s.add_argument("--verbose", action="store_true")

    s = sub.add_parser("bench", parents=[common], help="PSNR/SSIM table for hard, MMSE and soft decoding")
    s.add_argument("--corpus", type=Path, required=True, help="directory of grayscale images")
    s.add_argument("--qfs", type=_quality_list, default=[5, 10, 40])
    s.add_argument("--dict", type=Path, default=None, help="dictionary; without it only hard and mmse run")
    s.add_argument("--out", type=Path, required=True, help="CSV table")
    s.add_argument("--single-iter", action="store_true", help="one outer soft-decoding iteration")
    s.add_argument("--regularizer", choices=KINDS, default=None, help="graph prior of the soft method")
    s.add_argument("--compare-regularizers", action="store_true",
                   help="add one soft-<kind> row per graph prior")
    s.add_argument("--rasters", type=Path, default=None, help="directory for decoded PGMs")
    s.add_argument("--timing", action="store_true", help="fill the runtime_ms column (not reproducible)")

    s = sub.add_parser("graph-demo", parents=[common], help="spectral clustering view of a 1-D signal, as CSV")
    s.add_argument("--signal", choices=SIGNALS, default="pws")
    s.add_argument("--length", type=_positive_int, default=16)
    s.add_argument("--delta", type=_nonneg, default=0.2, help="largest step inside a piece")
    s.add_argument("--Delta", type=_nonneg, default=4.0, help="smallest step across pieces")
    s.add_argument("--sigma1", type=_nonneg, default=None)
    s.add_argument("--out", type=Path, required=True)
    return p


def _settings(args) -> dict:
    settings = read_config(args.config) if args.config is not None else {}
    flag_keys = {"lambda1": "lambda1", "lambda2": "lambda2_base", "iters": "max_outer_iters",
                 "regularizer": "regularizer", "sigma1": "sigma1", "sigma2": "sigma2"}
    if args.command in ("soft-decode", "bench"):
        for flag, key in flag_keys.items():
            v = getattr(args, flag, None)
            if v is not None:
                settings[key] = v
    settings["threads"] = args.threads if args.threads is not None else default_threads()
    return settings


def _corpus(directory: Path) -> dict[str, np.ndarray]:
    from .jpeg_codec import read_pgm

    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise FileNotFoundError(f"no images ({', '.join(IMAGE_SUFFIXES)}) in {directory}")
    return {p.stem: read_pgm(p) for p in files}


def _require(path: Path, what: str) -> None:
    if not path.is_file():
        raise FileNotFoundError(f"{what} not found: {path}")


# ---------------------------------------------------------------- subcommands

def _encode(args, cfg) -> None:
    from .jpeg_codec import encode_jpeg, read_pgm

    _require(args.input, "input image")
    args.out.write_bytes(encode_jpeg(read_pgm(args.input), args.qf))


def _decode(args, cfg) -> None:
    from .jpeg_codec import hard_decode, read_jpeg, write_pgm
    from .laplacian_prior import mmse_decode

    _require(args.input, "input JPEG")
    qimg = read_jpeg(args.input)
    write_pgm(args.out, hard_decode(qimg) if args.mode == "hard" else mmse_decode(qimg))


def _soft_decode(args, cfg) -> None:
    from .jpeg_codec import read_jpeg, write_pgm
    from .soft_decoder import soft_decode
    from .sparse_dict import load_dict

    _require(args.input, "input JPEG")
    _require(args.dict, "dictionary")
    qimg = read_jpeg(args.input)
    raster, report = soft_decode(qimg, load_dict(args.dict), cfg)
    write_pgm(args.out, raster)
    if args.report is not None:
        args.report.write_text(report.to_json() + "\n")


def _train_dict(args, cfg) -> None:
    from .sparse_dict import ksvd_train, sample_training_patches, save_dict

    images = _corpus(args.corpus)
    patches = sample_training_patches(list(images.values()), args.patch, args.patches, seed=args.seed)
    d = ksvd_train(patches, args.atoms, args.sparsity, args.iters, seed=args.seed,
                   source=str(args.corpus), verbose=args.verbose)
    save_dict(d, args.out)


def _bench(args, cfg) -> None:
    from .metrics import BASE_METHODS, bench, method_names, write_csv
    from .sparse_dict import load_dict

    images = _corpus(args.corpus)
    dictionary = None
    if args.dict is not None:
        _require(args.dict, "dictionary")
        dictionary = load_dict(args.dict)
        methods = method_names(KINDS if args.compare_regularizers else ())
    else:
        methods = tuple(m for m in BASE_METHODS if m != "soft")
    reports = bench(images, args.qfs, methods, dictionary, cfg, single_iter=args.single_iter,
                    timing=args.timing, out_dir=args.rasters)
    write_csv(reports, args.out)


def _graph_demo(args, cfg) -> None:
    from .graph_prior import ncut_demo, pws_signal

    n = args.length
    if args.signal == "pws":
        x = pws_signal(n, args.delta, args.Delta)
    elif args.signal == "pwc":
        x = np.where(np.arange(n) < n // 2, 1.0 + args.Delta, 1.0)
    else:
        x = np.ones(n)
    rep = ncut_demo(x, args.delta, args.Delta, sigma1=args.sigma1)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "signal", "eigenvalue", "v2", "f2", "eig_reconstruction", "dct_reconstruction"])
        for i in range(n):
            w.writerow([i] + [repr(float(a[i])) for a in
                              (x, rep.eigenvalues, rep.v2, rep.f2, rep.eig_reconstruction, rep.dct_reconstruction)])
    print(f"fiedler_number={rep.fiedler_number:.6g} pwc_error={rep.pwc_error:.6g} "
          f"degenerate={rep.degenerate} eig_recon_error={rep.eig_recon_error:.6g} "
          f"dct_recon_error={rep.dct_recon_error:.6g}")


COMMANDS = {"encode": _encode, "decode": _decode, "soft-decode": _soft_decode,
            "train-dict": _train_dict, "bench": _bench, "graph-demo": _graph_demo}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config is not None:
            _require(args.config, "config file")
        cfg = solver_config(_settings(args))
    except (UsageError, FileNotFoundError) as exc:
        parser.print_usage(sys.stderr)
        print(f"softjpeg: error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args, cfg)
    except (SoftJpegError, OSError, ValueError) as exc:
        print(f"softjpeg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
