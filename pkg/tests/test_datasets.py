import numpy as np
import pytest

pytest.importorskip("skimage")

from softjpeg.datasets import (STRUCTURED_CROPS, _load, TRAINING_NAMES, edge_structure_score, structured_test_set,
                               training_images, write_corpus)
from softjpeg.jpeg_codec import read_pgm


def test_structured_crops():
    imgs = structured_test_set()
    assert list(imgs) == [c.name for c in STRUCTURED_CROPS]
    for im in imgs.values():
        assert im.shape == (128, 128) and im.dtype == np.uint8
        assert edge_structure_score(im) > 0


@pytest.mark.parametrize("crop", STRUCTURED_CROPS, ids=lambda c: c.name)
def test_each_crop_is_the_best_window_of_its_source(crop):
    src = _load(crop.source)
    windows = [src[r:r + 128, c:c + 128]
               for r in range(0, src.shape[0] - 127, 32) for c in range(0, src.shape[1] - 127, 32)]
    if crop.source == "retina":
        windows = [w for w in windows if np.mean(w < 20) <= 0.25]
    best = max(edge_structure_score(w) for w in windows)
    assert edge_structure_score(crop.load()) == best


def test_training_sources_are_disjoint_from_test_sources():
    assert not set(TRAINING_NAMES) & {c.source for c in STRUCTURED_CROPS}
    assert all(im.ndim == 2 and im.dtype == np.uint8 for im in training_images())


def test_edge_score_rejects_texture(rng):
    assert edge_structure_score(rng.integers(0, 255, (64, 64))) == -1.0
    assert edge_structure_score(np.zeros((64, 64))) == 0.0


def test_write_corpus(tmp_path):
    imgs = {"z": np.zeros((8, 8), np.uint8), "a": np.full((8, 16), 7, np.uint8)}
    paths = write_corpus(tmp_path, imgs)
    assert [p.name for p in paths] == ["a.pgm", "z.pgm"]
    np.testing.assert_array_equal(read_pgm(paths[0]), imgs["a"])
