import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from afb_screen.errors import DegenerateMoments
from afb_screen.features import (
    DESCRIPTOR_NAMES,
    ClassifierGates,
    Detection,
    ShapeDescriptors,
    Verdict,
    classify,
    compute_descriptors,
    contour_perimeter,
    convex_hull,
    detect,
    polygon_perimeter,
    second_moments,
    trace_contour,
)
from afb_screen.imaging import BinaryMask
from afb_screen.morphology import Component, label_components
from afb_screen.synthgen import rasterize_capsule
from oracles import chain_length, crack_chain


def _comp(pixels):
    px = sorted(map(tuple, np.asarray(pixels).tolist()), key=lambda p: (p[1], p[0]))
    return Component(1, np.array(px))


def _rect(w, h, x0=0, y0=0):
    return _comp([(x, y) for y in range(y0, y0 + h) for x in range(x0, x0 + w)])


def test_single_pixel_contour_and_perimeter(backend):
    c = _comp([(4, 7)])
    contour = trace_contour(c)
    assert contour.tolist() == [[4, 7]]
    assert contour_perimeter(contour) == 4.0


def test_single_pixel_has_degenerate_moments(backend):
    with pytest.raises(DegenerateMoments):
        compute_descriptors(_comp([(0, 0)]))


def test_square_10x10(backend):
    c = _rect(10, 10, 3, 5)
    contour = trace_contour(c)
    assert len(contour) == 36
    d = compute_descriptors(c)
    assert d.area == 100
    assert d.perimeter == 36.0
    assert d.circularity == pytest.approx(4 * math.pi * 100 / 36 ** 2)
    assert d.circularity == pytest.approx(0.970, abs=5e-4)
    assert d.roughness == pytest.approx(1.0)
    assert d.eccentricity == pytest.approx(0.0, abs=1e-12)


def test_l_tromino_matches_edge_walk(backend):
    px = [(0, 0), (0, 1), (1, 1)]
    c = _comp(px)
    assert contour_perimeter(trace_contour(c)) == pytest.approx(chain_length(crack_chain(px)))
    assert contour_perimeter(trace_contour(c)) == pytest.approx(2 + math.sqrt(2))


def test_horizontal_line_moments(backend):
    d = compute_descriptors(_rect(20, 1))
    # a 1-px-wide uniform segment of n pixels has variance (n^2 - 1) / 12
    assert d.major_axis_length == pytest.approx(4 * math.sqrt((20 ** 2 - 1) / 12))
    assert d.minor_axis_length == 0.0
    assert d.eccentricity > 0.99
    assert d.axis_ratio == math.inf


def test_disk_radius_20(backend):
    c = _comp(rasterize_capsule((50.0, 50.0), 40.0, 40.0, 0.0))
    d = compute_descriptors(c)
    assert 0.85 <= d.circularity <= 1.1
    assert d.eccentricity < 0.3


def test_second_moments_axis_aligned_rectangle():
    c = _rect(7, 3)
    l1, l2 = second_moments(c.pixels)
    assert l1 == pytest.approx((49 - 1) / 12)
    assert l2 == pytest.approx((9 - 1) / 12)


def test_convex_hull_of_square_points():
    pts = [(0, 0), (2, 0), (2, 2), (0, 2), (1, 1), (1, 0)]
    hull = convex_hull(pts)
    assert sorted(map(tuple, hull.tolist())) == [(0, 0), (0, 2), (2, 0), (2, 2)]
    assert polygon_perimeter(hull) == pytest.approx(8.0)


def test_convex_hull_degenerate():
    assert convex_hull([(3, 3)]).tolist() == [[3, 3]]
    assert polygon_perimeter(convex_hull([(0, 0), (5, 0)])) == pytest.approx(10.0)


def _pinch_free_hole_free(pixels):
    fg = set(pixels)
    xs = [p[0] for p in fg]
    ys = [p[1] for p in fg]
    for y in range(min(ys) - 1, max(ys) + 1):
        for x in range(min(xs) - 1, max(xs) + 1):
            a, b = (x, y) in fg, (x + 1, y + 1) in fg
            c, d = (x + 1, y) in fg, (x, y + 1) in fg
            if (a and b and not c and not d) or (c and d and not a and not b):
                return False
    # 4-connected background flood from outside the bbox must reach every background pixel
    lo_x, hi_x, lo_y, hi_y = min(xs) - 1, max(xs) + 1, min(ys) - 1, max(ys) + 1
    seen, stack = set(), [(lo_x, lo_y)]
    while stack:
        p = stack.pop()
        if p in seen or p in fg or not (lo_x <= p[0] <= hi_x and lo_y <= p[1] <= hi_y):
            continue
        seen.add(p)
        x, y = p
        stack += [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
    return len(seen) + len(fg) == (hi_x - lo_x + 1) * (hi_y - lo_y + 1)


@st.composite
def grown_blobs(draw):
    """4-connected blobs grown by random steps from a seed pixel."""
    n = draw(st.integers(2, 40))
    pts = [(0, 0)]
    steps = draw(st.lists(st.tuples(st.integers(0, 1000), st.sampled_from([(1, 0), (-1, 0), (0, 1), (0, -1)])),
                          min_size=n, max_size=n))
    for pick, (dx, dy) in steps:
        x, y = pts[pick % len(pts)]
        if (x + dx, y + dy) not in pts:
            pts.append((x + dx, y + dy))
    return pts


@settings(max_examples=200, deadline=None)
@given(grown_blobs())
def test_contour_matches_crack_walk_oracle(pixels):
    if not _pinch_free_hole_free(pixels):
        return
    c = _comp(pixels)
    got = [tuple(p) for p in trace_contour(c).tolist()]
    expected = crack_chain(pixels)
    assert got == expected
    assert contour_perimeter(got) == pytest.approx(chain_length(expected))


def _components(mask):
    return [c for c in label_components(BinaryMask(mask)) if c.area >= 2]


def _vec(d):
    return np.array([getattr(d, n) for n in DESCRIPTOR_NAMES if n != "axis_ratio"], float)


masks = arrays(bool, st.tuples(st.integers(2, 9), st.integers(2, 9)))


@settings(max_examples=100, deadline=None)
@given(masks, st.integers(-50, 50), st.integers(-50, 50))
def test_descriptors_translation_invariant(mask, dx, dy):
    for c in _components(mask):
        try:
            d = compute_descriptors(c)
        except DegenerateMoments:
            continue
        moved = compute_descriptors(c.translated(dx, dy))
        assert np.allclose(_vec(d), _vec(moved), atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(masks)
def test_descriptors_rotation_invariant(mask):
    for c in _components(mask):
        d = compute_descriptors(c)
        x, y = c.pixels[:, 0], c.pixels[:, 1]
        rotated = _comp(np.column_stack([-y, x]))
        assert np.allclose(_vec(d), _vec(compute_descriptors(rotated)), atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(masks)
def test_descriptor_invariants(mask):
    for c in _components(mask):
        d = compute_descriptors(c)
        assert d.area >= 1 and d.perimeter > 0
        assert 0 <= d.eccentricity <= 1
        assert d.minor_axis_length <= d.major_axis_length
        assert d.convex_hull_perimeter <= d.perimeter + 1e-6
        assert d.roughness <= 1 + 1e-6


def _desc(**over):
    base = dict(area=100, perimeter=40.0, circularity=0.3, roughness=0.9, major_axis_length=30.0,
                minor_axis_length=6.0, eccentricity=0.95, convex_hull_perimeter=36.0)
    base.update(over)
    return ShapeDescriptors(**base)


GATES = ClassifierGates({"area": (50, 150), "eccentricity": (0.85, 1.0), "circularity": (0.0, 0.5)})


def test_classify_midpoints_accepts():
    verdict, rejected = classify(_desc(area=100, eccentricity=0.925, circularity=0.25), GATES)
    assert verdict is Verdict.BACILLUS and rejected == []


def test_classify_lists_every_failing_gate():
    assert classify(_desc(area=151), GATES) == (Verdict.DEBRIS, ["area"])
    _, rejected = classify(_desc(area=10, circularity=0.9), GATES)
    assert sorted(rejected) == ["area", "circularity"]


def test_classify_bounds_inclusive():
    assert classify(_desc(area=150, eccentricity=0.85), GATES)[0] is Verdict.BACILLUS


def test_axis_ratio_gate():
    gates = ClassifierGates({"axis_ratio": (3.0, 20.0)})
    assert classify(_desc(), gates)[0] is Verdict.BACILLUS
    assert classify(_desc(minor_axis_length=15.0), gates)[1] == ["axis_ratio"]


@settings(max_examples=100)
@given(st.floats(0, 300), st.floats(0, 1), st.floats(0, 100), st.floats(0, 100))
def test_widening_gates_never_rejects_more(area, ecc, widen_lo, widen_hi):
    d = _desc(area=int(area), eccentricity=ecc)
    wide = ClassifierGates({n: (lo - widen_lo, hi + widen_hi) for n, (lo, hi) in GATES.intervals.items()})
    if classify(d, GATES)[0] is Verdict.BACILLUS:
        assert classify(d, wide)[0] is Verdict.BACILLUS
    assert set(classify(d, wide)[1]) <= set(classify(d, GATES)[1])


def test_gates_validation():
    with pytest.raises(ValueError):
        ClassifierGates({"area": (10, 5)})
    with pytest.raises(ValueError):
        ClassifierGates({"colour": (0, 1)})


def test_detection_invariant():
    c = _rect(10, 2)
    with pytest.raises(ValueError):
        Detection(c, _desc(), Verdict.DEBRIS, [])
    with pytest.raises(ValueError):
        Detection(c, _desc(), Verdict.BACILLUS, ["area"])


def test_generated_rod_passes_shipped_gates(backend):
    from afb_screen.config import default_config
    gates = default_config().gates
    rod = _comp(rasterize_capsule((60.0, 60.0), 40.0, 7.0, 0.6))
    det = detect(rod, gates)
    assert det.verdict is Verdict.BACILLUS, det.rejected_by
    disk = _comp(rasterize_capsule((60.0, 60.0), 26.0, 26.0, 0.0))
    assert detect(disk, gates).verdict is Verdict.DEBRIS
