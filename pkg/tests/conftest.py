import json
from pathlib import Path
from typing import Iterable, Sequence, Tuple

import pytest

from box_sensitivity.coco_io import Category, Dataset, Detection, GroundTruth, ImageInfo
from box_sensitivity.geometry import Box

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN_FIXTURES = ("two_images", "crowd", "ties", "mixed", "buckets", "ranked")


def make_dataset(
    gts: Iterable[Tuple],
    image_ids: Sequence[int] = (1,),
    category_ids: Sequence[int] = (1,),
) -> Dataset:
    """gts rows: (id, image_id, category_id, (x, y, w, h), area[, iscrowd])"""
    ground_truths = []
    for row in gts:
        ann_id, image_id, category_id, xywh, area = row[:5]
        iscrowd = bool(row[5]) if len(row) > 5 else False
        ground_truths.append(GroundTruth(ann_id, image_id, category_id, Box.from_xywh(*xywh), area, iscrowd))
    return Dataset(
        images=tuple(ImageInfo(i, 640, 480) for i in image_ids),
        categories=tuple(Category(c, f"cat{c}") for c in category_ids),
        ground_truths=tuple(ground_truths),
    )


def make_detections(rows: Iterable[Tuple]) -> list:
    """rows: (image_id, category_id, (x, y, w, h), score); ordinal = position"""
    return [
        Detection(image_id, category_id, Box.from_xywh(*xywh), score, i)
        for i, (image_id, category_id, xywh, score) in enumerate(rows)
    ]


def fixture_paths(name: str) -> Tuple[Path, Path]:
    return FIXTURES / f"{name}.annotations.json", FIXTURES / f"{name}.detections.json"


def load_golden(name: str) -> dict:
    with open(FIXTURES / f"{name}.golden.json") as f:
        return json.load(f)


@pytest.fixture
def single_box_dataset() -> Dataset:
    """One 10x10 small object at the origin of image 1"""
    return make_dataset([(1, 1, 1, (0, 0, 10, 10), 100.0)])


@pytest.fixture
def mixed_paths() -> Tuple[Path, Path]:
    return fixture_paths("mixed")
