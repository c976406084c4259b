"""Per-frequency Laplacian coefficient prior and the bin-restricted MMSE decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewBlocks
from .jpeg_codec import QuantizedImage, coefficients_to_raster, to_uint8

SCALE_FLOOR = 1e-4
MIN_BLOCKS = 16


@dataclass(frozen=True, eq=False)
class LaplacianParams:
    """Rates ``mu`` (row-major 8x8) of ``p(y) = mu/2 exp(-mu |y|)``.

    Frequencies flagged in ``uniform`` are reconstructed at the bin center.
    """

    mu: np.ndarray
    uniform: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(8, 8)
        uniform = np.asarray(self.uniform, dtype=bool).reshape(8, 8)
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise ValueError("Laplacian rates must be positive and finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "uniform", uniform)

    @property
    def scale(self) -> np.ndarray:
        return 1.0 / self.mu

    @classmethod
    def all_uniform(cls) -> "LaplacianParams":
        return cls(np.ones((8, 8)), np.ones((8, 8), dtype=bool))


def fit_scale(samples: np.ndarray) -> float:
    """Maximum-likelihood Laplacian scale (mean absolute value), floored."""
    samples = np.asarray(samples, dtype=np.float64)
    return max(float(np.mean(np.abs(samples))), SCALE_FLOOR)


def fit_laplacian(qimg: QuantizedImage) -> LaplacianParams:
    """Fit one Laplacian per AC frequency from bin-center coefficients; DC is uniform."""
    if qimg.n_blocks < MIN_BLOCKS:
        raise TooFewBlocks(f"need at least {MIN_BLOCKS} blocks, got {qimg.n_blocks}")
    coeffs = qimg.dequantized().reshape(-1, 64)
    scales = np.array([fit_scale(coeffs[:, i]) for i in range(64)])
    uniform = np.zeros(64, dtype=bool)
    uniform[0] = True
    return LaplacianParams(1.0 / scales, uniform)


def _truncated_exp_offset(width: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Mean offset from the lower edge of an exponential(scale) truncated to [0, width]."""
    t = width / scale
    small = t < 1e-3
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        exact = scale - width / np.expm1(t)
    # series of b - w/(e^t - 1) for small t, avoids cancellation
    series = width * (0.5 - t / 12.0 + t**3 / 720.0)
    return np.where(small, series, exact)


def mmse_coefficient(q, Q, scale=None, uniform: bool | np.ndarray = False):
    """Centroid of the Laplacian(scale) density over the bin ``[(q-1/2)Q, (q+1/2)Q)``.

    Works elementwise on arrays. ``scale`` is ``1/mu``; ``uniform`` selects
    the bin center.
    """
    q = np.asarray(q, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    center = q * Q
    if scale is None:
        return center
    scale = np.asarray(scale, dtype=np.float64)
    mag = np.abs(q)
    lower = (mag - 0.5) * Q
    est = lower + _truncated_exp_offset(Q * np.ones_like(lower), scale * np.ones_like(lower))
    est = np.minimum(np.maximum(est, lower), lower + Q)
    out = np.where(mag == 0, 0.0, np.sign(q) * est)
    out = np.where(uniform, center, out)
    return out if out.ndim else float(out)


def mmse_coefficients(qimg: QuantizedImage, params: LaplacianParams) -> np.ndarray:
    """MMSE coefficient estimates for every block, shape ``(by, bx, 8, 8)``."""
    return mmse_coefficient(qimg.blocks, qimg.luma_qtable.matrix, params.scale, params.uniform)


def mmse_raster(qimg: QuantizedImage, params: LaplacianParams, clamp: bool = True) -> np.ndarray:
    """Float raster of the MMSE estimate; ``clamp=False`` keeps out-of-range values."""
    return coefficients_to_raster(mmse_coefficients(qimg, params), qimg.width, qimg.height, clamp)


def mmse_decode(qimg: QuantizedImage, params: LaplacianParams | None = None) -> np.ndarray:
    """8-bit MMSE soft-decoded image; fits the prior when ``params`` is omitted."""
    if params is None:
        params = fit_laplacian(qimg)
    return to_uint8(mmse_raster(qimg, params))
