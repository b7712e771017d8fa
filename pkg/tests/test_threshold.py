import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from afb_screen.errors import DimensionMismatch
from afb_screen.imaging import BinaryMask, RgbImage, ScalarImage
from afb_screen.threshold import (
    IterativeThresholdParams,
    SauvolaParams,
    binarize,
    iterative_global_threshold,
    merge_masks,
    redness_map,
    sauvola_threshold_map,
    sauvola_threshold_map_interpolated,
)
from oracles import iterative_threshold_oracle, naive_sauvola, naive_sauvola_loops


def _rgb(pixels):
    return RgbImage(np.array(pixels, dtype=np.uint8))


def test_redness_pure_red():
    assert redness_map(_rgb([[[255, 0, 0]]])).data[0, 0] == 255.0


def test_redness_gray_is_zero():
    assert redness_map(_rgb([[[128, 128, 128]]])).data[0, 0] == 0.0


def test_redness_example_pixel():
    assert redness_map(_rgb([[[200, 100, 50]]])).data[0, 0] == 125.0


def test_redness_clamps_negative():
    assert redness_map(_rgb([[[0, 255, 255]]])).data[0, 0] == 0.0


def test_redness_half_values_kept():
    assert redness_map(_rgb([[[10, 0, 1]]])).data[0, 0] == 9.5


@settings(max_examples=60)
@given(arrays(np.uint8, (6, 5, 3)))
def test_redness_range_and_formula(arr):
    out = redness_map(RgbImage(arr)).data
    d = arr.astype(float)
    assert np.all(out >= 0) and np.all(out <= 255)
    assert np.array_equal(out, np.maximum(d[..., 0] - (d[..., 1] + d[..., 2]) / 2, 0))


def test_iterative_two_levels():
    t, mask = iterative_global_threshold(ScalarImage(np.array([[10.0, 10.0, 200.0, 200.0]])))
    assert t == pytest.approx(105.0)
    assert mask.data.tolist() == [[False, False, True, True]]


def test_iterative_constant_map():
    t, mask = iterative_global_threshold(ScalarImage(np.full((4, 4), 37.0)))
    assert t == 37.0
    assert not mask.data.any()


def test_iterative_respects_iteration_cap():
    vals = ScalarImage(np.array([[0.0, 1.0, 2.0, 50.0, 100.0, 255.0]]))
    params = IterativeThresholdParams(epsilon=1e-12, max_iterations=1)
    t, _ = iterative_global_threshold(vals, params)
    assert t == pytest.approx(iterative_threshold_oracle(vals.data, 1e-12, 1))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 7), elements=st.integers(0, 255).map(float)))
def test_iterative_matches_oracle(vals):
    t, mask = iterative_global_threshold(ScalarImage(vals))
    assert t == pytest.approx(iterative_threshold_oracle(vals, 0.5, 100), abs=1e-9)
    assert np.array_equal(mask.data, vals > t)


def test_iterative_params_validation():
    with pytest.raises(ValueError):
        IterativeThresholdParams(epsilon=0)
    with pytest.raises(ValueError):
        IterativeThresholdParams(max_iterations=0)


@pytest.mark.parametrize("window", [3, 5, 7])
def test_sauvola_matches_loop_oracle(rng, window):
    vals = rng.integers(0, 256, (9, 11)).astype(float)
    params = SauvolaParams(window=window, k=0.34, r_cap=128.0)
    got = sauvola_threshold_map(ScalarImage(vals), params).data
    assert np.allclose(got, naive_sauvola_loops(vals, window, 0.34, 128.0), atol=1e-9)


@pytest.mark.parametrize("window", [3, 7, 15, 31])
def test_sauvola_matches_shift_oracle(rng, window):
    vals = rng.integers(0, 256, (40, 37)).astype(float)
    got = sauvola_threshold_map(ScalarImage(vals), SauvolaParams(window=window)).data
    assert np.max(np.abs(got - naive_sauvola(vals, window, 0.34, 128.0))) <= 1e-6


def test_sauvola_non_integer_values(rng):
    vals = rng.random((20, 20)) * 255
    got = sauvola_threshold_map(ScalarImage(vals), SauvolaParams(window=7)).data
    assert np.allclose(got, naive_sauvola(vals, 7, 0.34, 128.0), atol=1e-6)


def test_sauvola_uniform_region_has_zero_deviation():
    got = sauvola_threshold_map(ScalarImage(np.full((10, 10), 200.0)), SauvolaParams(window=5, k=0.5)).data
    assert np.all(got == 200.0 * (1 - 0.5))


def test_sauvola_window_larger_than_image(rng):
    vals = rng.integers(0, 256, (4, 5)).astype(float)
    got = sauvola_threshold_map(ScalarImage(vals), SauvolaParams(window=31)).data
    m, s = vals.mean(), vals.std()
    assert np.allclose(got, m * (1 + 0.34 * (s / 128 - 1)))


@pytest.mark.parametrize("kwargs", [{"window": 4}, {"window": 1}, {"k": 0.1}, {"k": 0.6}, {"r_cap": 0}])
def test_sauvola_params_invalid(kwargs):
    with pytest.raises(ValueError):
        SauvolaParams(**kwargs)


def test_sauvola_speed_1024():
    vals = ScalarImage(np.random.default_rng(1).integers(0, 256, (1024, 1024)).astype(float))
    start = time.perf_counter()
    sauvola_threshold_map(vals)
    assert time.perf_counter() - start < 2.0


def test_interpolated_stride_one_is_exact(rng):
    vals = ScalarImage(rng.integers(0, 256, (30, 30)).astype(float))
    a = sauvola_threshold_map(vals).data
    b = sauvola_threshold_map_interpolated(vals, SauvolaParams(), 1).data
    assert np.array_equal(a, b)


def test_interpolated_hits_lattice_points(rng):
    vals = ScalarImage(rng.integers(0, 256, (33, 29)).astype(float))
    exact = sauvola_threshold_map(vals, SauvolaParams(window=7)).data
    approx = sauvola_threshold_map_interpolated(vals, SauvolaParams(window=7), 4).data
    rows = list(range(0, 33, 4)) + [32]
    cols = list(range(0, 29, 4)) + [28]
    assert np.allclose(approx[np.ix_(rows, cols)], exact[np.ix_(rows, cols)])


def test_interpolated_exact_on_linear_ramp_interior():
    # on a linear ramp the unclipped window mean and deviation are linear/constant
    y, x = np.mgrid[0:64, 0:64]
    ramp = ScalarImage((x + 2 * y).astype(float))
    params = SauvolaParams(window=7)
    exact = sauvola_threshold_map(ramp, params).data
    approx = sauvola_threshold_map_interpolated(ramp, params, 4).data
    # lattice cells whose corners all have unclipped windows
    assert np.allclose(approx[4:57, 4:57], exact[4:57, 4:57], atol=1e-9)


def test_interpolated_rejects_bad_stride():
    with pytest.raises(ValueError):
        sauvola_threshold_map_interpolated(ScalarImage(np.zeros((3, 3))), SauvolaParams(), 0)


def test_binarize_strictly_above():
    m = ScalarImage(np.array([[1.0, 2.0, 3.0]]))
    t = ScalarImage(np.array([[2.0, 2.0, 2.0]]))
    assert binarize(m, t).data.tolist() == [[False, False, True]]


def test_binarize_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        binarize(ScalarImage(np.zeros((2, 2))), ScalarImage(np.zeros((2, 3))))


def test_merge_modes():
    a = BinaryMask(np.array([[True, True, False, False]]))
    b = BinaryMask(np.array([[True, False, True, False]]))
    assert merge_masks(a, b).data.tolist() == [[True, False, False, False]]
    assert merge_masks(a, b, "or").data.tolist() == [[True, True, True, False]]
    with pytest.raises(ValueError):
        merge_masks(a, b, "xor")


@settings(max_examples=50)
@given(arrays(bool, (4, 6)), arrays(bool, (4, 6)))
def test_and_merge_is_subset_of_both(a, b):
    out = merge_masks(BinaryMask(a), BinaryMask(b)).data
    assert not np.any(out & ~a) and not np.any(out & ~b)


@settings(max_examples=60)
@given(arrays(np.float64, (5, 5), elements=st.integers(0, 255).map(float)),
       arrays(np.float64, (5, 5), elements=st.integers(0, 255).map(float)),
       arrays(np.float64, (5, 5), elements=st.integers(0, 40).map(float)))
def test_binarize_antitone_in_thresholds(g, t, bump):
    low = binarize(ScalarImage(g), ScalarImage(t)).data
    high = binarize(ScalarImage(g), ScalarImage(t + bump)).data
    assert not np.any(high & ~low)


def test_interpolated_deviation_is_measured(rng, record_property):
    vals = ScalarImage(rng.integers(0, 256, (128, 128)).astype(float))
    exact = sauvola_threshold_map(vals).data
    approx = sauvola_threshold_map_interpolated(vals, SauvolaParams(), 4).data
    mad = float(np.mean(np.abs(approx - exact)))
    record_property("stride4_mean_abs_deviation", mad)
    assert np.isfinite(mad)
