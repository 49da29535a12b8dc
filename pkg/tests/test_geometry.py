import numpy as np
import numpy.testing as npt
import pytest

from box_sensitivity.exceptions import ValidationError
from box_sensitivity.geometry import (
    DIRECTIONS,
    Box,
    Direction,
    enlarge,
    enlarge_boxes,
    iou,
    iou_crowd,
    iou_matrix,
    paired_iou,
    shift_boxes,
    shift_boxes_proportional,
    shift_direction,
    shift_proportional,
    shrink,
    shrink_boxes,
)


def test_box_rejects_negative_extent():
    with pytest.raises(ValidationError):
        Box(5, 0, 4, 10)
    with pytest.raises(ValidationError):
        Box.from_xywh(0, 0, 3, -1)


def test_box_xywh_conversion():
    b = Box.from_xywh(2, 3, 4, 5)
    assert b.as_tuple() == (2.0, 3.0, 6.0, 8.0)
    assert b.to_xywh() == (2.0, 3.0, 4.0, 5.0)
    assert b.area() == 20.0


def test_zero_area_box_is_allowed():
    b = Box(1, 1, 1, 5)
    assert b.area() == 0.0


def test_iou_identical_boxes():
    b = Box(0, 0, 10, 10)
    assert iou(b, b) == 1.0


def test_iou_disjoint_and_touching():
    assert iou(Box(0, 0, 10, 10), Box(20, 20, 30, 30)) == 0.0
    assert iou(Box(0, 0, 10, 10), Box(10, 0, 20, 10)) == 0.0


def test_iou_half_width_shift():
    assert iou(Box(0, 0, 10, 10), Box(5, 0, 15, 10)) == pytest.approx(1 / 3)


def test_iou_both_degenerate_is_zero():
    assert iou(Box(0, 0, 0, 0), Box(0, 0, 0, 0)) == 0.0


def test_iou_is_symmetric():
    a, b = Box(0, 0, 7, 3), Box(2, 1, 9, 11)
    assert iou(a, b) == iou(b, a)


def test_iou_crowd_uses_detection_area():
    crowd = Box(0, 0, 100, 100)
    assert iou_crowd(Box(10, 10, 20, 20), crowd) == 1.0
    assert iou_crowd(Box(90, 0, 110, 10), crowd) == pytest.approx(0.5)
    assert iou_crowd(Box(5, 5, 5, 5), crowd) == 0.0


def test_shift_proportional_closed_form():
    b = Box(0, 0, 10, 10)
    assert iou(b, shift_proportional(b, 0.5)) == pytest.approx(1 / 7)
    assert iou(b, shift_proportional(b, 1.0)) == pytest.approx(0.0, abs=1e-12)


def test_shift_proportional_rejects_out_of_range():
    with pytest.raises(ValidationError):
        shift_proportional(Box(0, 0, 1, 1), 1.5)


def test_shift_direction_diagonal():
    b = Box(0, 0, 10, 10)
    moved = shift_direction(b, Direction.DOWN_RIGHT, 2)
    assert moved.as_tuple() == (2, 2, 12, 12)
    assert iou(b, moved) == pytest.approx(64 / 136)


def test_shift_direction_up_decreases_y():
    moved = shift_direction(Box(0, 10, 10, 20), Direction.UP, 3)
    assert moved.as_tuple() == (0, 7, 10, 17)


def test_shift_rejects_negative_offset():
    with pytest.raises(ValidationError):
        shift_direction(Box(0, 0, 1, 1), Direction.LEFT, -1)


def test_enlarge_keeps_top_left():
    assert enlarge(Box(0, 0, 10, 10), 1).as_tuple() == (0, 0, 11, 11)


def test_shrink_clamps_at_zero_extent():
    assert shrink(Box(0, 0, 10, 10), 1).as_tuple() == (0, 0, 9, 9)
    assert shrink(Box(0, 0, 3, 3), 5).area() == 0.0


def test_direction_names_and_synonyms():
    assert Direction.from_name("down-right") is Direction.DOWN_RIGHT
    assert Direction.from_name("top-left") is Direction.UP_LEFT
    assert Direction.from_name("bottom") is Direction.DOWN
    with pytest.raises(ValidationError):
        Direction.from_name("sideways")


def test_direction_opposites():
    assert Direction.LEFT.opposite() is Direction.RIGHT
    assert Direction.UP_RIGHT.opposite() is Direction.DOWN_LEFT
    assert sum(d.is_diagonal for d in DIRECTIONS) == 4


def test_iou_matrix_matches_scalar_iou():
    dets = [Box(0, 0, 10, 10), Box(3, 4, 9, 20)]
    gts = [Box(1, 1, 11, 11), Box(0, 0, 100, 100)]
    crowd = np.array([False, True])
    m = iou_matrix(dets, gts, crowd)
    for i, d in enumerate(dets):
        assert m[i, 0] == iou(d, gts[0])
        assert m[i, 1] == iou_crowd(d, gts[1])


def test_iou_matrix_empty_shapes():
    assert iou_matrix(np.zeros((0, 4)), [Box(0, 0, 1, 1)]).shape == (0, 1)
    assert iou_matrix([Box(0, 0, 1, 1)], np.zeros((0, 4))).shape == (1, 0)


def test_paired_iou_rejects_length_mismatch():
    with pytest.raises(ValidationError):
        paired_iou(np.zeros((2, 4)), np.zeros((3, 4)))


def test_array_perturbations_match_scalar_ones():
    boxes = [Box(0, 0, 10, 10), Box(5, 7, 8, 30)]
    arr = np.array([b.as_tuple() for b in boxes])

    npt.assert_array_equal(enlarge_boxes(arr, 2), [enlarge(b, 2).as_tuple() for b in boxes])
    npt.assert_array_equal(shrink_boxes(arr, 4), [shrink(b, 4).as_tuple() for b in boxes])
    npt.assert_array_equal(
        shift_boxes_proportional(arr, 0.3), [shift_proportional(b, 0.3).as_tuple() for b in boxes]
    )
    d = Direction.UP_LEFT
    npt.assert_array_equal(
        shift_boxes(arr, d.dx, d.dy, 1.5), [shift_direction(b, d, 1.5).as_tuple() for b in boxes]
    )


def test_shift_boxes_per_box_directions():
    arr = np.array([[0, 0, 10, 10], [0, 0, 10, 10]], dtype=float)
    out = shift_boxes(arr, np.array([1, -1]), np.array([0, 1]), 2)
    npt.assert_array_equal(out, [[2, 0, 12, 10], [-2, 2, 8, 12]])


def test_shift_boxes_zero_offset_is_identity():
    arr = np.array([[1.5, 2.25, 10.125, 11]], dtype=float)
    npt.assert_array_equal(shift_boxes(arr, 1, 1, 0), arr)


def _random_boxes(seed, n=50):
    rng = np.random.default_rng(seed)
    corners = rng.integers(0, 200, size=(n, 2))
    sizes = rng.integers(1, 80, size=(n, 2))
    return [Box.from_xywh(float(x), float(y), float(w), float(h)) for (x, y), (w, h) in zip(corners, sizes)]


def test_iou_is_translation_invariant():
    rng = np.random.default_rng(11)
    a_boxes, b_boxes = _random_boxes(1), _random_boxes(2)
    for a, b in zip(a_boxes, b_boxes):
        tx, ty = (float(v) for v in rng.integers(-50, 50, size=2))
        moved_a = Box(a.x_l + tx, a.y_l + ty, a.x_r + tx, a.y_r + ty)
        moved_b = Box(b.x_l + tx, b.y_l + ty, b.x_r + tx, b.y_r + ty)
        assert iou(moved_a, moved_b) == pytest.approx(iou(a, b), abs=1e-12)


@pytest.mark.parametrize("direction", DIRECTIONS)
def test_shift_then_opposite_shift_restores_box(direction):
    for b in _random_boxes(3):
        there = shift_direction(b, direction, 7)
        assert there.width() == b.width() and there.height() == b.height()
        assert shift_direction(there, direction.opposite(), 7) == b


def test_iou_under_fixed_shift_grows_with_box_size():
    sizes = (4, 8, 16, 32, 64, 128, 256)
    for d in (Direction.DOWN_RIGHT, Direction.RIGHT, Direction.UP):
        values = [iou(Box.from_xywh(0, 0, s, s), shift_direction(Box.from_xywh(0, 0, s, s), d, 3.0)) for s in sizes]
        assert all(a < b for a, b in zip(values, values[1:])), d
