"""Overlapping patches that each enclose one 8x8 code block."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dct import BLOCK, T64
from .errors import LayoutMismatch


@dataclass(frozen=True, eq=False)
class PatchLayout:
    """Patch geometry over a block-aligned raster of ``height x width`` pixels.

    Patch ``p`` has top-left corner ``offsets[p]`` and encloses code block
    ``blocks[p]`` whose top-left sits at ``inner[p]`` inside the patch.
    """

    height: int
    width: int
    patch_size: int
    stride: int
    offsets: np.ndarray
    blocks: np.ndarray
    inner: np.ndarray

    @property
    def n_patches(self) -> int:
        return len(self.offsets)

    @property
    def n_pixels(self) -> int:
        return self.patch_size * self.patch_size

    def selection(self, p: int) -> np.ndarray:
        """Flat patch indices of the 64 enclosed-block pixels (row-major), i.e. ``M``."""
        return _selection(self.patch_size, *map(int, self.inner[p]))

    def enclosure_operator(self, p: int) -> np.ndarray:
        """``T M`` as a dense 64 x n matrix with orthonormal rows."""
        return _enclosure_operator(self.patch_size, *map(int, self.inner[p]))


@lru_cache(maxsize=None)
def _selection(ps: int, r0: int, c0: int) -> np.ndarray:
    rows = np.arange(r0, r0 + BLOCK)[:, None]
    cols = np.arange(c0, c0 + BLOCK)[None, :]
    idx = (rows * ps + cols).reshape(-1)
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=None)
def _enclosure_operator(ps: int, r0: int, c0: int) -> np.ndarray:
    m = np.zeros((BLOCK * BLOCK, ps * ps))
    m[np.arange(BLOCK * BLOCK), _selection(ps, r0, c0)] = 1.0
    op = T64 @ m
    op.setflags(write=False)
    return op


def make_layout(height: int, width: int, patch_size: int = 10, stride: int = BLOCK) -> PatchLayout:
    """One patch per code block, centered on it and shifted inward at the borders."""
    if stride != BLOCK:
        raise LayoutMismatch("patches must advance one code block at a time (stride 8)")
    if patch_size <= BLOCK:
        raise LayoutMismatch("patch must be larger than a code block")
    if height % BLOCK or width % BLOCK:
        raise LayoutMismatch("raster must be block aligned")
    if height < patch_size or width < patch_size:
        raise LayoutMismatch(f"raster {height}x{width} smaller than a {patch_size}-pixel patch")
    margin = (patch_size - BLOCK) // 2
    by, bx = height // BLOCK, width // BLOCK
    bi, bj = np.meshgrid(np.arange(by), np.arange(bx), indexing="ij")
    blocks = np.stack([bi.ravel(), bj.ravel()], axis=1)
    top = np.clip(blocks[:, 0] * BLOCK - margin, 0, height - patch_size)
    left = np.clip(blocks[:, 1] * BLOCK - margin, 0, width - patch_size)
    offsets = np.stack([top, left], axis=1)
    inner = blocks * BLOCK - offsets
    for a in (offsets, blocks, inner):
        a.setflags(write=False)
    return PatchLayout(height, width, patch_size, stride, offsets, blocks, inner)


def _check(raster_shape, layout: PatchLayout):
    if tuple(raster_shape) != (layout.height, layout.width):
        raise LayoutMismatch(f"raster {tuple(raster_shape)} vs layout {(layout.height, layout.width)}")


def extract_patches(raster: np.ndarray, layout: PatchLayout) -> np.ndarray:
    """Row-major flattened patches, shape ``(n_patches, patch_size**2)``."""
    raster = np.asarray(raster, dtype=np.float64)
    _check(raster.shape, layout)
    ps = layout.patch_size
    r = layout.offsets[:, 0][:, None, None] + np.arange(ps)[None, :, None]
    c = layout.offsets[:, 1][:, None, None] + np.arange(ps)[None, None, :]
    return raster[r, c].reshape(layout.n_patches, ps * ps)


def coverage(layout: PatchLayout) -> np.ndarray:
    """Number of patches covering each pixel."""
    counts = np.zeros((layout.height, layout.width))
    ps = layout.patch_size
    for top, left in layout.offsets:
        counts[top:top + ps, left:left + ps] += 1.0
    return counts


def assemble_patches(patches: np.ndarray, layout: PatchLayout) -> np.ndarray:
    """Average overlapping patches back into a raster (fixed accumulation order)."""
    patches = np.asarray(patches, dtype=np.float64)
    ps = layout.patch_size
    if patches.shape != (layout.n_patches, ps * ps):
        raise LayoutMismatch(f"expected {(layout.n_patches, ps * ps)} patches, got {patches.shape}")
    acc = np.zeros((layout.height, layout.width))
    counts = np.zeros((layout.height, layout.width))
    for p, (top, left) in enumerate(layout.offsets):
        acc[top:top + ps, left:left + ps] += patches[p].reshape(ps, ps)
        counts[top:top + ps, left:left + ps] += 1.0
    if np.any(counts == 0):
        raise LayoutMismatch("layout leaves pixels uncovered")
    return acc / counts


def block_dct_of_patch(patch: np.ndarray, layout: PatchLayout, p: int,
                       level_shift: float = 0.0) -> np.ndarray:
    """64 orthonormal DCT coefficients (row-major) of the block enclosed by patch ``p``."""
    patch = np.asarray(patch, dtype=np.float64).reshape(-1)
    if patch.size != layout.n_pixels:
        raise LayoutMismatch("patch length does not match layout")
    return T64 @ (patch[layout.selection(p)] - level_shift)
