import json

import pytest

from box_sensitivity.coco_io import (
    gt_as_detections,
    load_dataset,
    load_detections,
    write_detections,
)
from box_sensitivity.exceptions import ParseError, ValidationError
from box_sensitivity.geometry import Box

from .conftest import FIXTURES, fixture_paths, make_detections


def _write(path, doc):
    with open(path, "w") as f:
        json.dump(doc, f)
    return path


def test_load_dataset_mixed_fixture(mixed_paths):
    ds = load_dataset(mixed_paths[0])
    assert len(ds.images) == 10
    assert ds.category_ids() == [1, 2, 3, 4]
    assert ds.category_name(2) == "car"
    assert sum(gt.iscrowd for gt in ds.ground_truths) == 2
    assert "info" in ds.extra and "licenses" in ds.extra


def test_ground_truth_area_comes_from_annotation(mixed_paths):
    ds = load_dataset(mixed_paths[0])
    first = next(gt for gt in ds.ground_truths if gt.id == 1)
    assert first.area == 560
    assert first.box.area() == 600


def test_ground_truths_grouped_in_file_order(mixed_paths):
    ds = load_dataset(mixed_paths[0])
    groups = ds.ground_truths_by_key()
    assert [gt.id for gt in groups[(4, 2)]] == [8, 9]
    assert (10, 2) not in groups


def test_missing_file_raises_file_not_found(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope.json")


def test_invalid_json_raises_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_dataset(path)


def test_missing_top_level_key_raises_parse_error(tmp_path):
    path = _write(tmp_path / "a.json", {"images": [], "categories": []})
    with pytest.raises(ParseError, match="annotations"):
        load_dataset(path)


def test_negative_annotation_extent_names_the_annotation(tmp_path):
    doc = {
        "images": [{"id": 1}],
        "categories": [{"id": 1, "name": "x"}],
        "annotations": [{"id": 42, "image_id": 1, "category_id": 1, "bbox": [0, 0, -1, 5], "area": 5}],
    }
    with pytest.raises(ValidationError) as info:
        load_dataset(_write(tmp_path / "a.json", doc))
    assert info.value.offending == [42]


def test_missing_area_falls_back_to_bbox_area(tmp_path):
    doc = {
        "images": [{"id": 1}],
        "categories": [{"id": 1, "name": "x"}],
        "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0, 0, 4, 5]}],
    }
    ds = load_dataset(_write(tmp_path / "a.json", doc))
    assert ds.ground_truths[0].area == 20
    assert ds.ground_truths[0].iscrowd is False


def test_dangling_annotation_reference(tmp_path):
    doc = {
        "images": [{"id": 1}],
        "categories": [{"id": 1, "name": "x"}],
        "annotations": [{"id": 1, "image_id": 9, "category_id": 1, "bbox": [0, 0, 4, 5], "area": 20}],
    }
    with pytest.raises(ValidationError):
        load_dataset(_write(tmp_path / "a.json", doc))


def test_load_detections_assigns_file_ordinals(mixed_paths):
    ds = load_dataset(mixed_paths[0])
    dets = load_detections(mixed_paths[1], ds)
    assert len(dets) == 24
    assert [d.ordinal for d in dets] == list(range(24))
    assert dets[0].box == Box(11, 11, 31, 41)


def test_load_detections_lists_every_offending_entry():
    ds = load_dataset(fixture_paths("two_images")[0])
    with pytest.raises(ValidationError) as info:
        load_detections(FIXTURES / "malformed.detections.json", ds)
    offending = info.value.offending
    assert [o["index"] for o in offending] == [1, 2, 3]
    assert any("score" in p for p in offending[1]["problems"])
    assert len(offending[2]["problems"]) == 2


def test_load_detections_requires_array(tmp_path):
    ds = load_dataset(fixture_paths("two_images")[0])
    with pytest.raises(ParseError):
        load_detections(_write(tmp_path / "d.json", {"image_id": 1}), ds)


def test_empty_detections_file(tmp_path):
    ds = load_dataset(fixture_paths("two_images")[0])
    assert load_detections(_write(tmp_path / "d.json", []), ds) == []


def test_zero_width_detection_is_accepted(tmp_path):
    ds = load_dataset(fixture_paths("two_images")[0])
    rows = [{"image_id": 1, "category_id": 1, "bbox": [3, 3, 0, 4], "score": 0.5}]
    dets = load_detections(_write(tmp_path / "d.json", rows), ds)
    assert dets[0].box.area() == 0.0


def test_gt_as_detections_includes_crowd_in_id_order():
    ds = load_dataset(fixture_paths("crowd")[0])
    dets = gt_as_detections(ds)
    assert [d.box for d in dets] == [gt.box for gt in sorted(ds.ground_truths, key=lambda g: g.id)]
    assert all(d.score == 1.0 for d in dets)
    assert [d.ordinal for d in dets] == [0, 1]


def test_written_detections_reload_exactly(tmp_path):
    ds = load_dataset(fixture_paths("two_images")[0])
    dets = make_detections([(1, 1, (0.1, 0.2, 10.3, 6.7), 0.123456789)])
    path = write_detections(dets, tmp_path / "out" / "dets.json")
    again = load_detections(path, ds)
    assert again[0].score == dets[0].score
    assert again[0].box.to_xywh() == pytest.approx(dets[0].box.to_xywh(), abs=1e-12)


def _one_annotation(**overrides):
    annotation = {"id": 7, "image_id": 1, "category_id": 1, "bbox": [0, 0, 4, 5], "area": 20}
    annotation.update(overrides)
    return {
        "images": [{"id": 1, "width": 10, "height": 10}],
        "categories": [{"id": 1, "name": "x"}],
        "annotations": [annotation],
    }


@pytest.mark.parametrize("area", ["big", None, [20], float("inf")])
def test_non_numeric_area_names_the_annotation(tmp_path, area):
    with pytest.raises(ParseError, match="annotation 7"):
        load_dataset(_write(tmp_path / "a.json", _one_annotation(area=area)))


@pytest.mark.parametrize("key", ["images", "categories", "annotations"])
def test_top_level_sections_must_be_lists(tmp_path, key):
    doc = _one_annotation()
    doc[key] = None
    with pytest.raises(ParseError, match=key):
        load_dataset(_write(tmp_path / "a.json", doc))


def test_non_object_record_raises_parse_error(tmp_path):
    doc = _one_annotation()
    doc["images"].append(3)
    with pytest.raises(ParseError, match="record #1"):
        load_dataset(_write(tmp_path / "a.json", doc))


@pytest.mark.parametrize("overrides", [{"image_id": 1.7}, {"category_id": "1"}, {"id": True}])
def test_annotation_ids_must_be_integers(tmp_path, overrides):
    with pytest.raises(ParseError):
        load_dataset(_write(tmp_path / "a.json", _one_annotation(**overrides)))


def test_integral_float_ids_are_accepted(tmp_path):
    ds = load_dataset(_write(tmp_path / "a.json", _one_annotation(id=7.0, image_id=1.0)))
    assert ds.ground_truths[0].id == 7
    assert isinstance(ds.ground_truths[0].image_id, int)


@pytest.mark.parametrize("entry", [
    {"image_id": 1.7, "category_id": 1, "bbox": [0, 0, 2, 2], "score": 0.5},
    {"image_id": 1, "category_id": 1, "bbox": [0, 0, 2, 2], "score": "high"},
    {"image_id": 1, "category_id": 1, "bbox": [0, 0, "2", 2], "score": 0.5},
    [1, 1, [0, 0, 2, 2], 0.5],
])
def test_malformed_detection_entry_raises_parse_error(tmp_path, entry):
    ds = load_dataset(fixture_paths("two_images")[0])
    with pytest.raises(ParseError, match="detection #0"):
        load_detections(_write(tmp_path / "d.json", [entry]), ds)
