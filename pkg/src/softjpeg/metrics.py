"""PSNR, SSIM and the decoder benchmark."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch
from .graph_prior import KINDS
from .jpeg_codec import hard_decode, quantize_image, write_pgm
from .laplacian_prior import mmse_decode
from .soft_decoder import SolverConfig, soft_decode
from .sparse_dict import Dictionary

PEAK = 255.0
SSIM_WINDOW = 8
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2
CSV_HEADER = ("image", "qf", "method", "psnr_db", "ssim", "runtime_ms")
BASE_METHODS = ("hard", "mmse", "soft")


def _pair(ref, test):
    a = np.asarray(ref, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"raster shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(ref, test) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit rasters; ``inf`` when identical."""
    a, b = _pair(ref, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(PEAK**2 / mse)


def ssim(ref, test, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all ``window x window`` positions (stride 1, uniform weights, population moments)."""
    a, b = _pair(ref, test)
    if a.ndim != 2 or min(a.shape) < window:
        raise DimensionMismatch(f"need a 2-D raster of at least {window}x{window}, got {a.shape}")
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = wa.var(axis=(-2, -1))
    var_b = wb.var(axis=(-2, -1))
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class QualityReport:
    image: str
    qf: int
    method: str
    psnr: float
    ssim: float
    runtime_ms: float | None = None

    def row(self) -> list[str]:
        rt = "" if self.runtime_ms is None else f"{self.runtime_ms:.1f}"
        return [self.image, str(self.qf), self.method, _fmt(self.psnr), f"{self.ssim:.6f}", rt]


def _fmt(v: float) -> str:
    return "inf" if np.isinf(v) else f"{v:.4f}"


def method_names(kinds: tuple[str, ...] = ()) -> tuple[str, ...]:
    """Base methods plus one ``soft-<kind>`` entry per requested regularizer."""
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown regularizer kind {k!r}")
    return BASE_METHODS + tuple(f"soft-{k}" for k in kinds)


def decode_with(method: str, qimg, dictionary: Dictionary | None, cfg: SolverConfig) -> np.ndarray:
    if method == "hard":
        return hard_decode(qimg)
    if method == "mmse":
        return mmse_decode(qimg)
    if method == "soft" or method.startswith("soft-"):
        if dictionary is None:
            raise ValueError("soft decoding needs a dictionary")
        kind = cfg.regularizer if method == "soft" else method[len("soft-"):]
        return soft_decode(qimg, dictionary, replace(cfg, regularizer=kind))[0]
    raise ValueError(f"unknown method {method!r}")


def bench(images: dict[str, np.ndarray], qfs, methods=BASE_METHODS, dictionary: Dictionary | None = None,
          cfg: SolverConfig | None = None, single_iter: bool = False, timing: bool = False,
          out_dir: str | Path | None = None) -> list[QualityReport]:
    """Compress every image at every QF and score each decoder against the original.

    ``single_iter`` limits soft decoding to one outer iteration. Runtimes are
    recorded only with ``timing`` so that the table is reproducible byte for
    byte. Decoded rasters go to ``out_dir`` as ``<image>_q<qf>_<method>.pgm``.
    """
    cfg = cfg or SolverConfig()
    if single_iter:
        cfg = replace(cfg, max_outer_iters=1)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    reports = []
    for name in sorted(images):
        ref = np.asarray(images[name])
        for qf in qfs:
            qimg = quantize_image(ref, int(qf))
            for method in methods:
                t0 = time.perf_counter()
                rec = decode_with(method, qimg, dictionary, cfg)
                ms = (time.perf_counter() - t0) * 1e3 if timing else None
                reports.append(QualityReport(name, int(qf), method, psnr(ref, rec), ssim(ref, rec), ms))
                if out is not None:
                    write_pgm(out / f"{name}_q{int(qf)}_{method}.pgm", rec)
    return reports


def write_csv(reports, path: str | Path | None = None) -> str:
    """Serialize reports with a fixed header; returns the text and writes it if ``path`` is given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.row())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(source: str | Path) -> list[QualityReport]:
    """Parse a benchmark table written by :func:`write_csv` (path or CSV text)."""
    text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"expected header {','.join(CSV_HEADER)}")
    return [QualityReport(r[0], int(r[1]), r[2], float(r[3]), float(r[4]), float(r[5]) if r[5] else None)
            for r in rows[1:]]
