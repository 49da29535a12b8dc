import numpy as np
import numpy.testing as npt
import pytest

from box_sensitivity.exceptions import ValidationError
from box_sensitivity.geometry import Box, Direction
from box_sensitivity.synthetic import (
    DEFAULT_PROPORTIONAL_OFFSETS,
    RandomBoxConfig,
    closed_form_proportional,
    generate_boxes,
    iou_decay_fixed,
    iou_decay_proportional,
)


def test_generate_boxes_count_and_ranges():
    cfg = RandomBoxConfig(count=100, width_range=(4, 50), height_range=(10, 20), seed=1)
    boxes = generate_boxes(cfg)
    assert len(boxes) == 100
    assert all(b.area() > 0 for b in boxes)
    assert all(4 - 1e-9 <= b.width() <= 50 + 1e-9 for b in boxes)
    assert all(10 - 1e-9 <= b.height() <= 20 + 1e-9 for b in boxes)


def test_generate_boxes_is_seeded():
    cfg = RandomBoxConfig(count=20, seed=9)
    assert generate_boxes(cfg) == generate_boxes(cfg)
    assert generate_boxes(cfg) != generate_boxes(RandomBoxConfig(count=20, seed=10))


def test_config_validation():
    with pytest.raises(ValidationError):
        RandomBoxConfig(count=0)
    with pytest.raises(ValidationError):
        RandomBoxConfig(width_range=(10, 10))
    with pytest.raises(ValidationError):
        RandomBoxConfig(height_range=(0, 10))


def test_closed_form_values():
    assert closed_form_proportional(0.0) == 1.0
    assert closed_form_proportional(0.5) == pytest.approx(1 / 7)
    assert closed_form_proportional(1.0) == 0.0
    npt.assert_allclose(closed_form_proportional(np.array([0.0, 0.5])), [1.0, 1 / 7])


def test_proportional_decay_matches_closed_form():
    boxes = generate_boxes(RandomBoxConfig(count=1000, seed=0))
    table = iou_decay_proportional(boxes)
    npt.assert_allclose(table.offsets, DEFAULT_PROPORTIONAL_OFFSETS)
    expected = closed_form_proportional(table.offsets)[:, None]
    assert np.abs(table.ious - expected).max() < 1e-9


def test_proportional_curves_coincide_and_flatten():
    boxes = generate_boxes(RandomBoxConfig(count=200, seed=4))
    table = iou_decay_proportional(boxes)
    assert (table.ious.max(axis=1) - table.ious.min(axis=1)).max() < 1e-9
    mean = table.ious.mean(axis=1)
    assert mean[0] == pytest.approx(1.0)
    assert mean[-1] == pytest.approx(0.0, abs=1e-9)
    assert mean[0] - mean[1] > mean[-2] - mean[-1]


def test_fixed_decay_diagonal_value():
    table = iou_decay_fixed([Box(0, 0, 10, 10)], offsets=[0, 2])
    assert table.ious[0, 0] == 1.0
    assert table.ious[1, 0] == pytest.approx(64 / 136)


def test_fixed_decay_favours_larger_boxes():
    table = iou_decay_fixed([Box(0, 0, 10, 10), Box(0, 0, 20, 20)])
    small, large = table.ious[:, 0], table.ious[:, 1]
    assert (large[1:] > small[1:]).all()
    assert (np.diff(table.ious, axis=0) <= 0).all()


def test_fixed_decay_axis_direction():
    table = iou_decay_fixed([Box(0, 0, 10, 10)], offsets=[1], direction=Direction.RIGHT)
    assert table.ious[0, 0] == pytest.approx(90 / 110)
    assert table.mode == "fixed right"


def test_decay_summary_and_series():
    boxes = generate_boxes(RandomBoxConfig(count=50, seed=2))
    table = iou_decay_fixed(boxes)
    summary = table.summary()
    assert list(summary.columns) == ["offset", "mean", "min", "max"]
    assert len(summary) == 11
    assert (summary["min"] <= summary["mean"]).all() and (summary["mean"] <= summary["max"]).all()

    series = table.per_box_series(limit=4)
    assert len(series) == 4
    for points in series.values():
        assert [x for x, _ in points] == list(range(11))
        assert points[0][1] == 1.0


def test_proportional_offset_out_of_range():
    with pytest.raises(ValidationError):
        iou_decay_proportional([Box(0, 0, 10, 10)], offsets=[0, 1.5])


def test_identical_boxes_keep_separate_curves():
    table = iou_decay_fixed([Box(0, 0, 10, 10), Box(0, 0, 10, 10), Box(0, 0, 40, 40)], offsets=[0, 1])
    series = table.per_box_series(limit=3)
    assert len(series) == 3
    assert sorted(series) == ["#0 10x10 px", "#1 10x10 px", "#2 40x40 px"]
