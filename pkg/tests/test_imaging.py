import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from afb_screen.errors import DimensionMismatch, MalformedFile, UnsupportedFormat
from afb_screen.imaging import (
    ContrastStretchSpec,
    RgbImage,
    ScalarImage,
    contrast_stretch,
    decode_image,
    encode_png,
    encode_ppm,
    merge_planes,
    split_planes,
)


def _png(arr, mode):
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def test_decode_ppm_2x2_bytes_in_order():
    body = bytes(range(10, 22))
    img = decode_image(b"P6\n2 2\n255\n" + body)
    assert (img.width, img.height) == (2, 2)
    assert img.data.tobytes() == body


def test_decode_ppm_with_comment():
    img = decode_image(b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03")
    assert img.data.tolist() == [[[1, 2, 3]]]


def test_decode_ppm_16bit_rejected():
    with pytest.raises(UnsupportedFormat):
        decode_image(b"P6\n1 1\n65535\n" + b"\x00" * 6)


def test_decode_ppm_truncated_body():
    with pytest.raises(MalformedFile):
        decode_image(b"P6\n4 4\n255\n" + b"\x00" * 10)


def test_decode_png_roundtrip(rng):
    arr = rng.integers(0, 256, (7, 5, 3), dtype=np.uint8)
    img = decode_image(encode_png(RgbImage(arr)))
    assert np.array_equal(img.data, arr)


def test_decode_truncated_png_header():
    data = _png(np.zeros((4, 4, 3), np.uint8), "RGB")
    with pytest.raises(MalformedFile):
        decode_image(data[:20])


def test_decode_corrupt_png_body():
    data = bytearray(_png(np.full((16, 16, 3), 7, np.uint8), "RGB"))
    data = bytes(data[:40]) + b"\x00" * 30
    with pytest.raises(MalformedFile):
        decode_image(data)


def test_decode_grayscale_png_unsupported():
    with pytest.raises(UnsupportedFormat):
        decode_image(_png(np.zeros((4, 4), np.uint8), "L"))


def test_decode_rgba_png_unsupported():
    with pytest.raises(UnsupportedFormat):
        decode_image(_png(np.zeros((4, 4, 4), np.uint8), "RGBA"))


def test_decode_16bit_png_unsupported():
    buf = io.BytesIO()
    Image.fromarray(np.zeros((4, 4), np.uint16)).save(buf, format="PNG")
    with pytest.raises(UnsupportedFormat):
        decode_image(buf.getvalue())


@pytest.mark.parametrize("data", [b"GIF89a....", b"", b"P3\n1 1\n255\n1 2 3\n"])
def test_decode_other_formats(data):
    with pytest.raises(UnsupportedFormat):
        decode_image(data)


def test_ppm_encode_decode_roundtrip(rng):
    arr = rng.integers(0, 256, (3, 9, 3), dtype=np.uint8)
    assert decode_image(encode_ppm(RgbImage(arr))) == RgbImage(arr)


def test_split_planes_values():
    arr = np.zeros((2, 3, 3), np.uint8)
    arr[1, 2] = (10, 20, 30)
    r, g, b = split_planes(RgbImage(arr))
    assert (r.data[1, 2], g.data[1, 2], b.data[1, 2]) == (10, 20, 30)


def test_split_all_red():
    arr = np.zeros((4, 4, 3), np.uint8)
    arr[..., 0] = 255
    r, g, b = split_planes(RgbImage(arr))
    assert np.all(r.data == 255) and np.all(g.data == 0) and np.all(b.data == 0)


def test_merge_split_roundtrip_random_8x8(rng):
    arr = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
    out = merge_planes(*split_planes(RgbImage(arr)))
    assert out.data.tobytes() == arr.tobytes()


@settings(max_examples=50)
@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12), st.just(3))))
def test_merge_split_roundtrip_property(arr):
    assert merge_planes(*split_planes(RgbImage(arr))) == RgbImage(arr)


def test_merge_dimension_mismatch():
    a = ScalarImage(np.zeros((2, 2)))
    b = ScalarImage(np.zeros((2, 3)))
    with pytest.raises(DimensionMismatch):
        merge_planes(a, a, b)


def test_merge_constant_planes():
    planes = [ScalarImage(np.full((3, 4), v, float)) for v in (10, 20, 30)]
    img = merge_planes(*planes)
    assert np.all(img.data == np.array([10, 20, 30], np.uint8))


def test_stretch_half_up_rounding():
    plane = ScalarImage(np.array([[50.0, 100.0, 150.0]]))
    out = contrast_stretch(plane, ContrastStretchSpec(0, 255))
    assert out.data.tolist() == [[0.0, 128.0, 255.0]]


def test_stretch_full_range_is_identity():
    vals = np.arange(256, dtype=float).reshape(16, 16)
    out = contrast_stretch(ScalarImage(vals))
    assert np.array_equal(out.data, vals)


def test_stretch_constant_plane_unchanged():
    plane = ScalarImage(np.full((5, 5), 42.0))
    assert contrast_stretch(plane) is plane


def test_stretch_custom_range():
    out = contrast_stretch(ScalarImage(np.array([[0.0, 10.0]])), ContrastStretchSpec(20, 40))
    assert out.data.tolist() == [[20.0, 40.0]]


def test_stretch_spec_invariant():
    with pytest.raises(ValueError):
        ContrastStretchSpec(10, 10)


plane_values = arrays(np.float64, st.tuples(st.integers(1, 10), st.integers(1, 10)),
                      elements=st.integers(0, 255).map(float))


@settings(max_examples=100)
@given(plane_values)
def test_stretch_extrema_and_idempotence(vals):
    out = contrast_stretch(ScalarImage(vals))
    if vals.max() > vals.min():
        assert out.data.min() == 0 and out.data.max() == 255
    again = contrast_stretch(out)
    assert np.array_equal(again.data, out.data)


@settings(max_examples=100)
@given(plane_values)
def test_stretch_monotone(vals):
    out = contrast_stretch(ScalarImage(vals)).data.ravel()
    order = np.argsort(vals.ravel(), kind="stable")
    assert np.all(np.diff(out[order]) >= 0)


def test_scalar_image_rejects_nan():
    with pytest.raises(ValueError):
        ScalarImage(np.array([[np.nan]]))


def test_rasters_are_read_only(rng):
    img = RgbImage(rng.integers(0, 256, (2, 2, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1
