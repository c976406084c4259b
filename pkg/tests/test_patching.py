import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softjpeg.dct import Dct8x8
from softjpeg.errors import LayoutMismatch
from softjpeg.patching import (assemble_patches, block_dct_of_patch, coverage, extract_patches, make_layout)

layouts = st.tuples(st.integers(2, 8), st.integers(2, 8), st.sampled_from([10, 12, 14]))


def test_sixteen_square_has_four_overlapping_patches():
    lay = make_layout(16, 16, 10)
    assert lay.n_patches == 4
    np.testing.assert_array_equal(lay.offsets, [[0, 0], [0, 6], [6, 0], [6, 6]])
    np.testing.assert_array_equal(lay.inner, [[0, 0], [0, 2], [2, 0], [2, 2]])
    assert coverage(lay).max() == 4


def test_interior_patches_are_centered():
    lay = make_layout(40, 40, 10)
    p = 2 * 5 + 2
    np.testing.assert_array_equal(lay.blocks[p], [2, 2])
    np.testing.assert_array_equal(lay.offsets[p], [15, 15])
    np.testing.assert_array_equal(lay.inner[p], [1, 1])


def test_bad_layouts():
    for args in ((16, 16, 8), (20, 16, 10), (8, 8, 10)):
        with pytest.raises(LayoutMismatch):
            make_layout(*args)
    with pytest.raises(LayoutMismatch):
        make_layout(16, 16, 10, stride=6)
    lay = make_layout(16, 16, 10)
    with pytest.raises(LayoutMismatch):
        extract_patches(np.zeros((16, 24)), lay)
    with pytest.raises(LayoutMismatch):
        assemble_patches(np.zeros((3, 100)), lay)


@settings(max_examples=50, deadline=None)
@given(layouts, st.integers(0, 2**31 - 1))
def test_round_trip_and_enclosure(shape, seed):
    by, bx, ps = shape
    h, w = 8 * by, 8 * bx
    if min(h, w) < ps:
        return
    lay = make_layout(h, w, ps)
    gen = np.random.default_rng(seed)
    img = gen.integers(0, 256, size=(h, w)).astype(float)
    X = extract_patches(img, lay)
    np.testing.assert_array_equal(assemble_patches(X, lay), img)
    noisy = gen.normal(size=(h, w))
    np.testing.assert_allclose(assemble_patches(extract_patches(noisy, lay), lay), noisy, rtol=0, atol=1e-12)
    assert lay.n_patches == by * bx
    assert sorted(map(tuple, lay.blocks)) == [(i, j) for i in range(by) for j in range(bx)]
    for p in range(lay.n_patches):
        r, c = lay.blocks[p] * 8
        np.testing.assert_array_equal(X[p][lay.selection(p)], img[r:r + 8, c:c + 8].reshape(-1))


def test_overlap_of_two_constants_is_averaged():
    lay = make_layout(16, 16, 10)
    X = np.where(lay.blocks[:, 1:] == 0, 100.0, 200.0) * np.ones((1, 100))
    out = assemble_patches(X, lay)
    # left patches cover columns 0..9, right ones 6..15
    np.testing.assert_array_equal(out[:, 6:10], 150.0)
    np.testing.assert_array_equal(out[:, :6], 100.0)
    np.testing.assert_array_equal(out[:, 10:], 200.0)


def test_assembly_is_order_independent(rng):
    lay = make_layout(32, 40, 10)
    X = rng.normal(size=(lay.n_patches, 100))
    ref = assemble_patches(X, lay)
    perm = rng.permutation(lay.n_patches)
    acc = np.zeros((32, 40))
    cnt = np.zeros((32, 40))
    for p in perm:
        t, l = lay.offsets[p]
        acc[t:t + 10, l:l + 10] += X[p].reshape(10, 10)
        cnt[t:t + 10, l:l + 10] += 1
    np.testing.assert_allclose(acc / cnt, ref, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(assemble_patches(X, lay), ref)


def test_block_dct_of_patch(rng):
    lay = make_layout(24, 24, 10)
    y = block_dct_of_patch(np.full(100, 5.0), lay, 4)
    assert y[0] == pytest.approx(40.0, abs=1e-12) and np.abs(y[1:]).max() < 1e-12
    x = rng.normal(size=100)
    for p in range(lay.n_patches):
        blk = x[lay.selection(p)].reshape(8, 8)
        y = block_dct_of_patch(x, lay, p)
        np.testing.assert_allclose(y.reshape(8, 8), Dct8x8.forward(blk), atol=1e-12)
        assert np.linalg.norm(y) == pytest.approx(np.linalg.norm(blk), abs=1e-9)
        np.testing.assert_allclose(lay.enclosure_operator(p) @ x, y, atol=1e-12)
