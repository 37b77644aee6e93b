import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from skimage.metrics import structural_similarity

from fixtures import carpet, checker, random_tile
from fracmosaic.edges import canny, gaussian_blur
from fracmosaic.fractal import binarize, fractal_dimension
from fracmosaic.imgcore import save_image, to_grayscale
from fracmosaic.metrics import fd_report, fd_row, published_fd_table, report_csv, ssim
from fracmosaic.mosaic import median_blur

images = arrays(np.uint8, st.tuples(st.integers(11, 30), st.integers(11, 30)))


def reference_ssim(a, b):
    return structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
                                 data_range=255)


def test_ssim_identity_and_inversion():
    x = checker()
    assert abs(ssim(x, x) - 1.0) < 1e-9
    assert ssim(x, 255 - x) < 0


def test_ssim_matches_reference():
    rng = np.random.default_rng(0)
    a = to_grayscale(random_tile(rng, 48, 64))
    b = gaussian_blur(a, 1.2)
    assert ssim(a, b) == pytest.approx(reference_ssim(a, b), abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(images, st.data())
def test_ssim_symmetric_and_bounded(a, data):
    b = data.draw(arrays(np.uint8, st.just(a.shape)))
    s = ssim(a, b)
    assert -1.0 <= s <= 1.0
    assert abs(s - ssim(b, a)) < 1e-12
    assert abs(ssim(a, a.copy()) - 1.0) < 1e-9


def test_ssim_decreases_with_blur():
    x = to_grayscale(random_tile(np.random.default_rng(4), 64, 64))
    scores = [ssim(x, gaussian_blur(x, s)) for s in (0.5, 1.0, 2.0)]
    assert scores[0] < 1.0
    assert scores[0] > scores[1] > scores[2]


def test_ssim_validation():
    with pytest.raises(ValueError, match="mismatch"):
        ssim(np.zeros((12, 12), dtype=np.uint8), np.zeros((12, 13), dtype=np.uint8))
    with pytest.raises(ValueError, match="at least"):
        ssim(np.zeros((10, 12), dtype=np.uint8), np.zeros((10, 12), dtype=np.uint8))


def test_fd_report_carpet(tmp_path):
    save_image(tmp_path / "carpet.png", carpet(5))
    rows = fd_report(tmp_path)
    assert len(rows) == 1 and rows[0].name == "carpet.png"
    assert rows[0].fd_original == pytest.approx(math.log(8) / math.log(3), abs=0.05)
    assert 0.0 <= rows[0].fd_preprocessed <= 2.0


def test_fd_report_empty_dir(tmp_path):
    assert fd_report(tmp_path) == []
    assert report_csv([]) == "name,fd_o,fd_p\n"


def test_fd_report_is_a_fold_over_fractal_dimension(tmp_path):
    rng = np.random.default_rng(6)
    imgs = {f"img{i}.png": random_tile(rng) for i in range(3)}
    for name, img in imgs.items():
        save_image(tmp_path / name, img)
    for preprocess in (True, False):
        rows = fd_report(tmp_path, preprocess)
        for row in rows:
            gray = to_grayscale(imgs[row.name])
            edges_src = median_blur(gray, 3) if preprocess else gray
            assert row.fd_original == fractal_dimension(binarize(gray, "mean")).dimension
            assert row.fd_preprocessed == fractal_dimension(canny(edges_src)).dimension


def test_report_csv_shape(tmp_path):
    save_image(tmp_path / "a.png", checker())
    (tmp_path / "bad.png").write_bytes(b"junk")
    rows = fd_report(tmp_path)
    text = report_csv(rows)
    lines = text.splitlines()
    assert lines[0] == "name,fd_o,fd_p"
    assert [l.split(",")[0] for l in lines[1:]] == ["a.png", "bad.png"]
    assert rows[1].warnings and rows[1].fd_original == 0.0
    assert all(len(l.split(",")[1]) == 6 for l in lines[1:])


def test_flat_image_warns_instead_of_failing():
    row = fd_row("flat", np.full((32, 32), 9, dtype=np.uint8))
    assert row.fd_original == 0.0 and row.fd_preprocessed == 0.0 and len(row.warnings) == 2


def test_published_table_format():
    rows = published_fd_table()
    assert len(rows) == 10
    taj = next(r for r in rows if r.name == "Taj Mahal")
    assert (taj.fd_original, taj.fd_preprocessed) == (1.6438, 1.6875)
    assert all(0 <= r.fd_original <= 2 and 0 <= r.fd_preprocessed <= 2 for r in rows)
    assert report_csv(rows).splitlines()[0] == "name,fd_o,fd_p"
