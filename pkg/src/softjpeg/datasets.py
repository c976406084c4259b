"""Bundled image corpora built from scikit-image's sample data.

The training images and the structured test crops come from disjoint
source pictures, so a dictionary trained on one never sees the other.
scikit-image is an optional dependency used only here.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

CROP = 128
TRAINING_NAMES = ("coffee", "chelsea", "rocket", "coins", "page")


def _skdata():
    try:
        from skimage import data
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise ImportError("the bundled corpora need scikit-image (pip install scikit-image)") from exc
    return data


def _gray(a: np.ndarray) -> np.ndarray:
    """8-bit luma with the Rec. 601 weights; alpha is dropped."""
    a = np.asarray(a)
    if a.ndim == 2:
        return a.astype(np.uint8) if a.dtype == np.uint8 else _scale(a)
    rgb = a[..., :3].astype(np.float64)
    y = rgb @ np.array([0.299, 0.587, 0.114])
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def _scale(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    lo, hi = float(a.min()), float(a.max())
    if hi == lo:
        return np.zeros(a.shape, dtype=np.uint8)
    return np.floor((a - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)


def _load(name: str) -> np.ndarray:
    data = _skdata()
    if name == "horse":
        return np.where(data.horse(), 0, 255).astype(np.uint8)
    if name == "phantom":
        return _scale(data.shepp_logan_phantom())
    if name == "retina":
        return _gray(data.retina())[::4, ::4]
    return _gray(getattr(data, name)())


@dataclass(frozen=True)
class Crop:
    source: str
    top: int
    left: int

    @property
    def name(self) -> str:
        return self.source

    def load(self, size: int = CROP) -> np.ndarray:
        img = _load(self.source)
        out = img[self.top:self.top + size, self.left:self.left + size]
        if out.shape != (size, size):
            raise ValueError(f"crop {self} falls outside its {img.shape} source")
        return np.ascontiguousarray(out)


# Crops with strong, sparse edges: each maximizes the share of pixels with
# gradient magnitude above 25 among 128x128 windows (stride 32) whose
# median gradient stays below 4. For the retina, windows that are more than a
# quarter black surround (values below 20) are skipped. Five are photographs,
# two are graphics.
STRUCTURED_CROPS = (
    Crop("camera", 160, 192),
    Crop("clock", 96, 128),
    Crop("text", 32, 320),
    Crop("cat", 160, 32),
    Crop("retina", 64, 0),
    Crop("horse", 160, 0),
    Crop("phantom", 128, 224),
)


def structured_test_set(crops=STRUCTURED_CROPS) -> dict[str, np.ndarray]:
    """The 128x128 structured grayscale crops used for acceptance and benchmarks."""
    return {c.name: c.load() for c in crops}


def training_images(names=TRAINING_NAMES) -> list[np.ndarray]:
    """Full-size grayscale training pictures, disjoint from the test crops."""
    return [_load(n) for n in names]


def edge_structure_score(window: np.ndarray, strong: float = 25.0, smooth: float = 4.0) -> float:
    """Selection score behind STRUCTURED_CROPS; ``-1`` for busy (textured) windows."""
    gy, gx = np.gradient(np.asarray(window, dtype=np.float64))
    g = np.hypot(gx, gy)
    return float(np.mean(g > strong)) if np.median(g) < smooth else -1.0


def write_corpus(directory: str | Path, images: dict[str, np.ndarray]) -> list[Path]:
    """Write rasters as PGM files (the CLI's corpus format)."""
    from .jpeg_codec import write_pgm

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in sorted(images):
        p = d / f"{name}.pgm"
        write_pgm(p, images[name])
        paths.append(p)
    return paths
