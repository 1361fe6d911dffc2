import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from figcap.geometry import AreaPair, Box, excess_lost, expand_to_include, iou


def pixel_sets(box):
    """Independent oracle: the set of integer pixels a rounded box covers."""
    x0, y0, x1, y1 = box.rounded()
    return {(x, y) for x in range(x0, x1) for y in range(y0, y1)}


def oracle_iou(a, b):
    pa, pb = pixel_sets(a), pixel_sets(b)
    union = pa | pb
    if not union:
        return 0.0
    return len(pa & pb) / len(union)


def oracle_excess_lost(truth, found):
    pt, pf = pixel_sets(truth), pixel_sets(found)
    return (len(pf - pt) / len(pt), len(pt - pf) / len(pt))


class TestIou:
    def test_identity(self):
        assert iou(Box(0, 0, 10, 10), Box(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(Box(0, 0, 10, 10), Box(20, 20, 30, 30)) == 0.0

    def test_half_overlap(self):
        # pixel count over the union grid: 50 shared / 150 total
        assert iou(Box(0, 0, 10, 10), Box(5, 0, 15, 10)) == pytest.approx(50 / 150)

    def test_subpixel_shift_rounds_to_identity(self):
        assert iou(Box(0, 0, 10, 10), Box(0.4, 0, 10.4, 10)) == 1.0

    def test_sliver_collapses_to_zero(self):
        assert iou(Box(0, 0, 0.2, 10), Box(0, 0, 10, 10)) == 0.0


class TestExcessLost:
    def test_identical(self):
        assert excess_lost(Box(0, 0, 100, 100), Box(0, 0, 100, 100)) == AreaPair(1.0, 0.0, 0.0)

    def test_excess_only(self):
        ap = excess_lost(Box(0, 0, 100, 100), Box(0, 0, 100, 110))
        assert ap.iou == pytest.approx(100 / 110)
        assert ap.excess_frac == pytest.approx(0.10)
        assert ap.lost_frac == 0.0

    def test_lost_only(self):
        ap = excess_lost(Box(0, 0, 100, 100), Box(0, 5, 100, 100))
        assert ap.iou == pytest.approx(0.95)
        assert ap.excess_frac == 0.0
        assert ap.lost_frac == pytest.approx(0.05)


class TestExpand:
    def test_self(self):
        assert expand_to_include(Box(0, 0, 1, 1), Box(0, 0, 1, 1)) == Box(0, 0, 1, 1)

    def test_hull(self):
        assert expand_to_include(Box(0, 0, 1, 1), Box(2, 2, 3, 3)) == Box(0, 0, 3, 3)

    def test_partial_overlap(self):
        assert expand_to_include(Box(1, 1, 4, 2), Box(0, 1.5, 2, 3)) == Box(0, 1, 4, 3)


def test_invalid_boxes_rejected():
    with pytest.raises(ValueError):
        Box(5, 0, 5, 10)
    with pytest.raises(ValueError):
        Box(0, 0, -1, 10)
    with pytest.raises(ValueError):
        Box(0, float("nan"), 1, 1)


def random_int_box(rng, grid=200):
    x0, x1 = sorted(rng.choice(grid, size=2, replace=False))
    y0, y1 = sorted(rng.choice(grid, size=2, replace=False))
    return Box(float(x0), float(y0), float(x1 + 1), float(y1 + 1))


def test_oracle_equivalence_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        a, b = random_int_box(rng), random_int_box(rng)
        assert iou(a, b) == pytest.approx(oracle_iou(a, b), abs=0)
        exp_excess, exp_lost = oracle_excess_lost(a, b)
        ap = excess_lost(a, b)
        assert ap.excess_frac == pytest.approx(exp_excess, abs=0)
        assert ap.lost_frac == pytest.approx(exp_lost, abs=0)


finite_boxes = st.builds(
    lambda x0, y0, w, h: Box(x0, y0, x0 + w, y0 + h),
    st.floats(0, 500), st.floats(0, 500),
    st.floats(0.5, 500), st.floats(0.5, 500),
)


@settings(max_examples=200)
@given(finite_boxes, finite_boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@settings(max_examples=200)
@given(finite_boxes, finite_boxes)
def test_iou_one_iff_rounded_identical(a, b):
    if iou(a, b) == 1.0:
        assert a.rounded() == b.rounded()
    elif a.rounded() == b.rounded() and min(
        a.rounded()[2] - a.rounded()[0], a.rounded()[3] - a.rounded()[1]
    ) > 0:
        assert iou(a, b) == 1.0


small_boxes = st.builds(
    lambda x0, y0, w, h: Box(x0, y0, x0 + w, y0 + h),
    st.floats(0, 60), st.floats(0, 60),
    st.floats(0.5, 60), st.floats(0.5, 60),
)


@settings(max_examples=200, deadline=None)
@given(small_boxes, small_boxes)
def test_lost_plus_intersection_equals_truth(truth, found):
    pt, pf = pixel_sets(truth), pixel_sets(found)
    assert len(pt - pf) + len(pt & pf) == len(pt)


@settings(max_examples=100)
@given(finite_boxes, finite_boxes)
def test_iou_one_means_no_excess_no_lost(a, b):
    ap = excess_lost(a, b)
    if ap.iou == 1.0:
        assert ap.excess_frac == 0.0 and ap.lost_frac == 0.0
    assert ap.lost_frac <= 1.0
