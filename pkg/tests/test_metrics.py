import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from softjpeg.errors import DimensionMismatch
from softjpeg.jpeg_codec import hard_decode, quantize_image
from softjpeg.metrics import (CSV_HEADER, QualityReport, bench, method_names, psnr, read_csv, ssim, write_csv)

pairs = st.integers(8, 20).flatmap(
    lambda n: st.tuples(arrays(np.uint8, (n, n)), arrays(np.uint8, (n, n))))


def test_psnr_reference_values():
    a = np.zeros((8, 8), np.uint8)
    assert psnr(a, a) == float("inf")
    assert psnr(a, np.full((8, 8), 255, np.uint8)) == 0.0
    checker = (np.indices((8, 8)).sum(axis=0) % 2 * 20).astype(np.uint8)
    flat = np.full((8, 8), 10, np.uint8)
    assert psnr(checker, flat) == pytest.approx(10 * np.log10(255**2 / 100.0))
    with pytest.raises(DimensionMismatch):
        psnr(a, np.zeros((8, 9)))


def scalar_ssim(a, b):
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    vals = []
    for i in range(a.shape[0] - 7):
        for j in range(a.shape[1] - 7):
            x = a[i:i + 8, j:j + 8].astype(float)
            y = b[i:i + 8, j:j + 8].astype(float)
            mx, my = x.mean(), y.mean()
            cov = ((x - mx) * (y - my)).mean()
            vals.append((2 * mx * my + c1) * (2 * cov + c2) / ((mx**2 + my**2 + c1) * (x.var() + y.var() + c2)))
    return float(np.mean(vals))


def test_ssim_reference_values(rng):
    a = rng.integers(0, 256, (12, 10)).astype(np.uint8)
    assert ssim(a, a) == pytest.approx(1.0)
    c = np.full((10, 10), 100, np.uint8)
    v = ssim(c, c + 50)
    assert v < 1 and v == pytest.approx(scalar_ssim(c, c + 50), rel=1e-12)
    b = rng.integers(0, 256, (12, 10)).astype(np.uint8)
    assert ssim(a, b) == pytest.approx(scalar_ssim(a, b), rel=1e-10)
    pattern = (np.indices((8, 8)).sum(axis=0) % 2 * 200 + 20).astype(np.uint8)
    assert ssim(pattern, 240 - pattern) < 0
    with pytest.raises(DimensionMismatch):
        ssim(np.zeros((4, 4)), np.zeros((4, 4)))


@settings(max_examples=100, deadline=None)
@given(pairs)
def test_metrics_are_symmetric_and_bounded(p):
    a, b = p
    assert psnr(a, b) == psnr(b, a) and psnr(a, b) >= 0
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
    assert ssim(a, b) <= 1 + 1e-12


def test_bench_rows_and_csv_round_trip(tmp_path, natural_crop):
    imgs = {"b": natural_crop, "a": natural_crop[:32, :32]}
    reports = bench(imgs, [5, 40], ("hard", "mmse"), out_dir=tmp_path / "r")
    assert [(r.image, r.qf, r.method) for r in reports][:3] == [("a", 5, "hard"), ("a", 5, "mmse"), ("a", 40, "hard")]
    assert len(reports) == 2 * 2 * 2
    hard = hard_decode(quantize_image(natural_crop, 5))
    assert reports[4].psnr == psnr(natural_crop, hard)
    assert (tmp_path / "r" / "b_q5_hard.pgm").exists()
    text = write_csv(reports, tmp_path / "t.csv")
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    back = read_csv(tmp_path / "t.csv")
    assert [(r.image, r.qf, r.method) for r in back] == [(r.image, r.qf, r.method) for r in reports]
    assert all(abs(x.psnr - y.psnr) < 1e-4 and x.runtime_ms is None for x, y in zip(back, reports))
    assert write_csv(back) == text


def test_csv_formatting():
    r = QualityReport("x", 5, "hard", float("inf"), 1.0, 12.345)
    assert r.row() == ["x", "5", "hard", "inf", "1.000000", "12.3"]
    with pytest.raises(ValueError):
        read_csv("bad,header\n1,2\n")


def test_method_names():
    assert method_names() == ("hard", "mmse", "soft")
    assert method_names(("lerag",)) == ("hard", "mmse", "soft", "soft-lerag")
    with pytest.raises(ValueError):
        method_names(("bogus",))
