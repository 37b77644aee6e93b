import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fixtures import half_plane, ramp_tile, random_tile
from fracmosaic.imgcore import Rect, crop, hflip
from fracmosaic.mosaic import (
    CODES, TileFigures, average_blend, center_distance, compose, derive_seed, intra_mosaicslice, inter_mix,
    inter_partners, inverse_sepia, junction, median_blur, median_offset, motion_kernel, parse_code, read_rects,
    seam_blur, sepia,
)


def px(*rgb):
    return np.array([[rgb]], dtype=np.uint8)


@pytest.mark.parametrize("rgb, expected", [
    ((0, 0, 0), (0, 0, 0)),
    ((255, 255, 255), (255, 255, 239)),
    ((100, 100, 100), (135, 120, 94)),
])
def test_sepia_exact(rgb, expected):
    assert tuple(sepia(px(*rgb))[0, 0]) == expected


def test_sepia_needs_color():
    with pytest.raises(ValueError, match="requires color"):
        sepia(np.zeros((4, 4), dtype=np.uint8))


@settings(max_examples=60)
@given(st.tuples(*[st.integers(0, 120)] * 3), st.sampled_from([0.0, 0.5, 1.0]))
def test_sepia_is_linear_below_saturation(rgb, alpha):
    # inputs up to 120 map to at most 162, so nothing clamps
    x = np.array(rgb, dtype=np.float64)
    scaled = np.floor(alpha * x + 0.5).astype(np.uint8)
    lhs = sepia(px(*scaled))[0, 0].astype(float)
    rhs = alpha * sepia(px(*rgb))[0, 0].astype(float)
    # one rounding on each side plus the input rounding (at most 0.5 * 1.351)
    assert np.abs(lhs - rhs).max() <= 0.5 + 0.5 * alpha + 0.5 * 1.351


def test_inverse_sepia_examples():
    assert np.abs(inverse_sepia(sepia(px(100, 100, 100))).astype(int) - 100).max() <= 2
    assert tuple(inverse_sepia(px(0, 0, 0))[0, 0]) == (0, 0, 0)
    assert inverse_sepia(px(255, 255, 239)).max() <= 255
    assert inverse_sepia(px(255, 255, 239), "pinv").max() <= 255


@settings(max_examples=60)
@given(st.integers(0, 188))
def test_inverse_sepia_round_trips_gray(v):
    # 188 * 1.351 = 254, so gray levels up to 188 never clamp
    assert np.abs(inverse_sepia(sepia(px(v, v, v))).astype(int) - v).max() <= 1


def test_average_blend_examples():
    a = np.random.default_rng(0).integers(0, 256, (5, 5, 3), dtype=np.uint8)
    b = np.random.default_rng(1).integers(0, 256, (5, 5, 3), dtype=np.uint8)
    assert np.array_equal(average_blend(a, a), a)
    assert average_blend(px(100, 100, 100), px(200, 200, 200))[0, 0, 0] == 150
    assert np.array_equal(average_blend(a, b), average_blend(b, a))


def test_center_distance_examples():
    r = Rect(0, 0, 4, 4)
    assert center_distance(r, r) == 0
    assert center_distance(Rect(-1, -1, 2, 2), Rect(2, 3, 2, 2)) == 5
    assert center_distance(Rect(0, 0, 2, 6), Rect(9, 1, 4, 4)) == center_distance(Rect(9, 1, 4, 4), Rect(0, 0, 2, 6))


def test_median_offset():
    assert median_offset([3.0, 1.0, 2.0]) == 2.0
    assert median_offset([2.0, 2.0]) == 2.0
    assert median_offset([1.0, 4.0]) == 1.0
    # 4.0 and 4.2 both round to the modal 4, so the lower middle value is kept
    assert median_offset([1.0, 4.0, 4.2, 9.0]) == 4.0
    assert median_offset([1.0, 3.4, 4.2, 4.4]) == 4.2
    with pytest.raises(ValueError):
        median_offset([])


def test_median_blur_examples():
    flat = np.full((9, 9), 60, dtype=np.uint8)
    assert np.array_equal(median_blur(flat), flat)
    salt = flat.copy()
    salt[4, 4] = 255
    assert np.array_equal(median_blur(salt), flat)
    hp = half_plane(16, 16)
    once = median_blur(hp)
    assert np.array_equal(median_blur(once)[1:-1], once[1:-1])
    with pytest.raises(ValueError):
        median_blur(flat, 4)


def test_motion_kernel_normalized():
    k = motion_kernel(9, 30.0)
    assert k.shape == (9, 9) and abs(k.sum() - 1) < 1e-12
    assert np.count_nonzero(motion_kernel(5, 0.0)[2]) == 5


@pytest.mark.parametrize("mode", ["gaussian", "motion"])
def test_seam_blur_trivial_cases(mode):
    img = np.random.default_rng(0).integers(0, 256, (16, 16, 3), dtype=np.uint8)
    assert np.array_equal(seam_blur(img, Rect(4, 0, 0, 16), mode), img)
    flat = np.full((16, 16, 3), 77, dtype=np.uint8)
    assert np.array_equal(seam_blur(flat, Rect(4, 0, 8, 16), mode), flat)
    with pytest.raises(ValueError, match="seam outside image"):
        seam_blur(img, Rect(12, 0, 8, 16), mode)


def test_seam_blur_softens_hard_join():
    img = np.zeros((16, 32), dtype=np.uint8)
    img[:, 16:] = 255
    out = seam_blur(img, Rect(12, 0, 8, 16), "gaussian", 2.0)
    before = np.abs(np.diff(img.astype(int), axis=1)).max()
    inside = np.abs(np.diff(out[:, 12:20].astype(int), axis=1)).max()
    assert inside < before
    assert np.array_equal(out[:, :12], img[:, :12]) and np.array_equal(out[:, 20:], img[:, 20:])


def test_parse_code():
    assert parse_code("A'B") == (("A", True), ("B", False))
    assert parse_code("B'A'") == (("B", True), ("A", True))
    assert [parse_code(c) for c in CODES] == [((x, fx), (y, fy)) for x, y in (("A", "B"), ("B", "A"))
                                             for fx in (False, True) for fy in (False, True)]
    with pytest.raises(ValueError):
        parse_code("AA")


def test_tile_figures_validation():
    t = ramp_tile()
    with pytest.raises(ValueError, match="overlap"):
        TileFigures(t, Rect(0, 0, 20, 20), Rect(10, 10, 20, 20))
    with pytest.raises(ValueError, match="outside"):
        TileFigures(t, Rect(0, 0, 20, 20), Rect(50, 0, 20, 20))


def test_read_rects(tmp_path):
    p = tmp_path / "t.rects"
    p.write_text("A 0 0 10 12\nB 20 0 10 12\n")
    assert read_rects(p) == (Rect(0, 0, 10, 12), Rect(20, 0, 10, 12))
    p.write_text("A 0 0 10 12\n")
    with pytest.raises(ValueError, match="both A and B"):
        read_rects(p)


def two_figure_tile():
    t = random_tile(np.random.default_rng(11), 40, 60)
    return TileFigures(t, Rect(2, 4, 24, 30), Rect(34, 6, 24, 30))


def test_intra_gives_eight():
    outs = intra_mosaicslice(two_figure_tile())
    assert len(outs) == 8
    assert all(o.shape == (40, 60, 3) for o in outs)


def test_intra_ab_without_seam_is_verbatim():
    t = two_figure_tile()
    out = intra_mosaicslice(t, seam_width=0)[CODES.index("AB")]
    assert np.array_equal(out, t.tile)


def test_intra_flipped_figures_regionwise():
    t = two_figure_tile()
    out = intra_mosaicslice(t, seam_width=0)[CODES.index("A'B'")]
    assert np.array_equal(crop(out, t.figure_a), hflip(crop(t.tile, t.figure_a)))
    assert np.array_equal(crop(out, t.figure_b), hflip(crop(t.tile, t.figure_b)))
    swapped = compose(t, "BA")
    assert np.array_equal(crop(swapped, t.figure_a), crop(t.tile, t.figure_b))


def test_junction_between_side_by_side_slots():
    assert junction(Rect(0, 0, 10, 8), Rect(14, 0, 10, 8), 4, 24, 8) == Rect(10, 0, 4, 8)
    assert junction(Rect(0, 0, 10, 8), Rect(14, 0, 10, 8), 0, 24, 8).w == 0


@pytest.mark.parametrize("tile", [ramp_tile(), random_tile(np.random.default_rng(3))], ids=["ramp", "random"])
def test_inter_self_pair(tile):
    t = TileFigures.split(tile)
    res = inter_mix(t, t, seed=9)
    assert res.offset == 0 and res.shift == (0, 0)
    ref = inverse_sepia(sepia(tile)).astype(int)
    assert np.abs(res.image.astype(int) - ref).max() <= 2


def test_inter_deterministic_and_shape_stable():
    rng = np.random.default_rng(5)
    a = TileFigures(random_tile(rng), Rect(2, 2, 24, 40), Rect(34, 4, 26, 40))
    b = TileFigures(random_tile(rng, 40, 52), Rect(0, 0, 20, 30), Rect(26, 8, 24, 30))
    r1 = inter_mix(a, b, seed=1, code="A'B")
    r2 = inter_mix(a, b, seed=1, code="A'B")
    assert np.array_equal(r1.image, r2.image) and r1.warnings == r2.warnings
    for s in range(4):
        assert inter_mix(a, b, seed=s).image.shape == a.tile.shape


def test_inter_partners():
    for i in range(10):
        p = inter_partners(10, i, 42)
        assert len(p) == 3 and len(set(p)) == 3 and i not in p
        assert p == inter_partners(10, i, 42)
    assert inter_partners(2, 0, 1) == [1, 1, 1]
    with pytest.raises(ValueError):
        inter_partners(1, 0, 1)


def test_derive_seed_stable():
    assert derive_seed("a", 1) == derive_seed("a", 1)
    assert derive_seed("a", 1) != derive_seed("a", 2)
    digest = hashlib.sha256("tile03\x1f7".encode()).digest()
    assert derive_seed("tile03", 7) == int.from_bytes(digest[:8], "little")
