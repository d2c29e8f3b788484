import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from essential_features.image import (
    PPMFormatError,
    area_resize,
    as_image,
    decode_ppm,
    derive_seed,
    encode_ppm,
    horizontal_flip,
    load_ppm,
    make_rng,
    pad_and_random_crop,
    pad_reflect101,
    reflect101_index,
    save_ppm,
)


def test_load_p6(tmp_path):
    path = tmp_path / "a.ppm"
    path.write_bytes(b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 0, 255]))
    img = load_ppm(path)
    assert img.shape == (1, 2, 3)
    np.testing.assert_array_equal(img[0], [[1, 0, 0], [0, 0, 1]])


def test_load_p5(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P5 1 1 255\n" + bytes([128]))
    img = load_ppm(path)
    assert img.shape == (1, 1, 1)
    assert img[0, 0, 0] == 128 / 255


def test_header_comment():
    img = decode_ppm(b"P5\n# made by hand\n1 1\n255\n" + bytes([7]))
    assert img[0, 0, 0] == 7 / 255


@pytest.mark.parametrize(
    "payload, offset",
    [
        (b"P3\n1 1\n255\n0 0 0\n", 0),
        (b"P6\n1 1\n65535\n" + bytes(6), 7),
        (b"P6\n2 2\n255\n" + bytes(5), 16),
        (b"P6\nx 1\n255\n", 3),
    ],
)
def test_bad_headers(payload, offset):
    with pytest.raises(PPMFormatError) as err:
        decode_ppm(payload)
    assert err.value.offset == offset
    assert "byte offset" in str(err.value)


def test_save_bytes(tmp_path):
    path = tmp_path / "x.ppm"
    save_ppm(as_image([[[1.0, 0.0, 0.0]]]), path)
    assert path.read_bytes() == b"P6\n1 1\n255\n" + bytes([255, 0, 0])


def test_save_rounds_half_away_from_zero():
    assert encode_ppm(as_image([[0.5]]))[-1] == 128
    # 1.5 / 255 rounds up to 2
    assert encode_ppm(as_image([[1.5 / 255]]))[-1] == 2


def test_every_byte_round_trips(tmp_path):
    values = np.arange(256, dtype=np.uint8).reshape(16, 16, 1)
    path = tmp_path / "all.pgm"
    path.write_bytes(b"P5\n16 16\n255\n" + values.tobytes())
    img = load_ppm(path)
    save_ppm(img, tmp_path / "again.pgm")
    assert (tmp_path / "again.pgm").read_bytes() == path.read_bytes()


def test_round_trip_error_bound(tmp_path):
    img = make_rng(3).uniform(size=(9, 7, 3))
    save_ppm(img, tmp_path / "r.ppm")
    back = load_ppm(tmp_path / "r.ppm")
    assert np.max(np.abs(back - img)) <= 1 / 510 + 1e-15


def test_save_error_names_path(tmp_path):
    missing = tmp_path / "nope" / "x.ppm"
    with pytest.raises(OSError, match="nope"):
        save_ppm(as_image([[0.0]]), missing)


def test_check_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        as_image([[1.5]])
    with pytest.raises(ValueError):
        as_image(np.zeros((2, 2, 2)))


def test_reflect101_row():
    row = as_image([[0.1, 0.2, 0.3]])
    # a 1-row image cannot be padded by 1 (margin <= min(H, W) - 1), so use a 3x3 block
    block = np.repeat(row, 3, axis=0)
    padded = pad_reflect101(block, 1)
    np.testing.assert_array_equal(padded[1, :, 0], [0.2, 0.1, 0.2, 0.3, 0.2])


def test_reflect101_index_long_margin():
    # b | a b c | b, then keeps bouncing
    np.testing.assert_array_equal(reflect101_index(3, -4, 7), [0, 1, 2, 1, 0, 1, 2, 1, 0, 1, 2])
    np.testing.assert_array_equal(reflect101_index(1, -2, 3), [0, 0, 0, 0, 0])


def test_pad_reflect101_constant_and_identity():
    const = np.full((4, 5, 3), 0.25)
    np.testing.assert_array_equal(pad_reflect101(const, 2), np.full((8, 9, 3), 0.25))
    img = make_rng(0).uniform(size=(4, 5, 3))
    np.testing.assert_array_equal(pad_reflect101(img, 0), img)


def test_pad_reflect101_margin_too_large():
    with pytest.raises(ValueError):
        pad_reflect101(np.zeros((3, 5, 1)), 3)
    with pytest.raises(ValueError):
        pad_reflect101(np.zeros((3, 5, 1)), -1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9), st.data())
def test_pad_then_crop_is_identity(h, w, data):
    margin = data.draw(st.integers(0, min(h, w) - 1))
    img = make_rng(h * 31 + w).uniform(size=(h, w, 3))
    padded = pad_reflect101(img, margin)
    np.testing.assert_array_equal(padded[margin : margin + h, margin : margin + w], img)


def _box_mean(img, fy, fx):
    h, w, c = img.shape
    out = np.zeros((h // fy, w // fx, c))
    for i in range(h // fy):
        for j in range(w // fx):
            out[i, j] = img[i * fy : (i + 1) * fy, j * fx : (j + 1) * fx].mean(axis=(0, 1))
    return out


@pytest.mark.parametrize("shape, out", [((4, 4, 3), (2, 2)), ((256, 256, 3), (32, 32)), ((12, 9, 1), (4, 3))])
def test_area_resize_integer_factor_is_box_mean(shape, out):
    img = make_rng(1).uniform(size=shape)
    got = area_resize(img, *out)
    want = _box_mean(img, shape[0] // out[0], shape[1] // out[1])
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    assert abs(got.mean() - img.mean()) < 1e-12


def test_area_resize_fractional_footprint():
    # 3 -> 2: output 0 covers [0, 1.5) (weights 2/3, 1/3), output 1 covers [1.5, 3) (1/3, 2/3)
    img = as_image([[0.0, 0.3, 0.9]] * 3)
    got = area_resize(img, 3, 2)
    np.testing.assert_allclose(got[0, :, 0], [0.1, 0.7], atol=1e-15)


def test_area_resize_constant_and_upscale():
    np.testing.assert_allclose(area_resize(np.full((7, 5, 3), 0.4), 3, 2), 0.4, atol=1e-15)
    with pytest.raises(ValueError):
        area_resize(np.zeros((4, 4, 3)), 8, 4)


def test_horizontal_flip():
    img = as_image([[0.1, 0.2, 0.3]])
    np.testing.assert_array_equal(horizontal_flip(img)[0, :, 0], [0.3, 0.2, 0.1])
    rand = make_rng(2).uniform(size=(5, 6, 3))
    np.testing.assert_array_equal(horizontal_flip(horizontal_flip(rand)), rand)
    narrow = rand[:, :1]
    np.testing.assert_array_equal(horizontal_flip(narrow), narrow)


def test_pad_and_random_crop():
    img = make_rng(4).uniform(size=(32, 32, 3))
    np.testing.assert_array_equal(pad_and_random_crop(img, 0, make_rng(0)), img)
    padded = np.pad(img, ((4, 4), (4, 4), (0, 0)))
    for seed in range(10):
        out = pad_and_random_crop(img, 4, make_rng(seed))
        assert out.shape == (32, 32, 3)
        hits = [
            (dy, dx)
            for dy in range(9)
            for dx in range(9)
            if np.array_equal(padded[dy : dy + 32, dx : dx + 32], out)
        ]
        assert hits
        np.testing.assert_array_equal(pad_and_random_crop(img, 4, make_rng(seed)), out)


def test_pad_and_random_crop_reflect_fill():
    img = make_rng(5).uniform(size=(8, 8, 3))
    out = pad_and_random_crop(img, 2, make_rng(1), fill="reflect")
    assert out.shape == img.shape
    assert np.all(out > 0)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert len({derive_seed(7, i) for i in range(100)}) == 100
    a = make_rng(123).uniform(size=4)
    np.testing.assert_array_equal(a, make_rng(123).uniform(size=4))
