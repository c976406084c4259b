"""Orthonormal 8x8 type-II DCT and the JPEG zig-zag permutation."""

from __future__ import annotations

import numpy as np

BLOCK = 8


def dct_matrix(n: int = BLOCK) -> np.ndarray:
    """Orthonormal DCT-II matrix ``C`` such that ``C @ y`` transforms a length-n signal."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    c[0, :] = np.sqrt(1.0 / n)
    return c


_C8 = dct_matrix(BLOCK)
_C8.setflags(write=False)

# 64x64 operator acting on row-major flattened blocks: vec(C y C^T) = kron(C, C) vec(y)
T64 = np.kron(_C8, _C8)
T64.setflags(write=False)

# ZIGZAG[k] is the row-major index of the k-th coefficient in zig-zag order
ZIGZAG = np.array([
    0, 1, 8, 16, 9, 2, 3, 10,
    17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
], dtype=np.intp)
ZIGZAG.setflags(write=False)

# INV_ZIGZAG[r] is the zig-zag position of row-major index r
INV_ZIGZAG = np.argsort(ZIGZAG)
INV_ZIGZAG.setflags(write=False)


class Dct8x8:
    """Forward/inverse 2-D DCT on arrays whose last two axes are 8x8 blocks."""

    matrix = _C8

    @staticmethod
    def forward(blocks: np.ndarray) -> np.ndarray:
        b = np.asarray(blocks, dtype=np.float64)
        return _C8 @ b @ _C8.T

    @staticmethod
    def inverse(coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs, dtype=np.float64)
        return _C8.T @ c @ _C8


def forward_dct(blocks: np.ndarray) -> np.ndarray:
    return Dct8x8.forward(blocks)


def inverse_dct(coeffs: np.ndarray) -> np.ndarray:
    return Dct8x8.inverse(coeffs)


def dct2_ortho(x: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT of a square array of any size."""
    c = dct_matrix(x.shape[0])
    return c @ np.asarray(x, dtype=np.float64) @ dct_matrix(x.shape[1]).T
