"""
COCO annotation and detection-results files.

Annotation documents follow the COCO "instances" layout (top-level images,
annotations, categories; bbox as [x, y, w, h] in absolute pixels). Results
files are a JSON array of {image_id, category_id, bbox, score}.

Ground-truth areas come from the annotation's `area` field (segmentation area)
and are never recomputed from the bbox; size buckets depend on it.
"""

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

from .exceptions import ParseError, ValidationError
from .geometry import Box

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

REQUIRED_TOP_LEVEL_KEYS = ("images", "annotations", "categories")


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class GroundTruth:
    """Annotated object; `area` is the annotation's own area field"""
    id: int
    image_id: int
    category_id: int
    box: Box
    area: float
    iscrowd: bool = False


@dataclass(frozen=True)
class Detection:
    """Scored prediction; `ordinal` is its stable input position"""
    image_id: int
    category_id: int
    box: Box
    score: float
    ordinal: int


@dataclass(frozen=True)
class Dataset:
    images: Tuple[ImageInfo, ...]
    categories: Tuple[Category, ...]
    ground_truths: Tuple[GroundTruth, ...]
    # info / licenses and any other top-level keys, passed through untouched
    extra: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        image_ids = [img.id for img in self.images]
        category_ids = [cat.id for cat in self.categories]
        if len(set(image_ids)) != len(image_ids):
            raise ValidationError("Duplicate image ids in dataset", _duplicates(image_ids))
        if len(set(category_ids)) != len(category_ids):
            raise ValidationError("Duplicate category ids in dataset", _duplicates(category_ids))

        known_images, known_categories = set(image_ids), set(category_ids)
        dangling = [
            gt.id for gt in self.ground_truths
            if gt.image_id not in known_images or gt.category_id not in known_categories
        ]
        if dangling:
            raise ValidationError(
                f"{len(dangling)} annotations reference unknown image or category ids "
                f"(annotation ids: {dangling[:10]})",
                dangling,
            )

    def image_ids(self) -> List[int]:
        return sorted(img.id for img in self.images)

    def category_ids(self) -> List[int]:
        return sorted(cat.id for cat in self.categories)

    def category_name(self, category_id: int) -> str:
        return self._category_names[category_id]

    @cached_property
    def _category_names(self) -> Dict[int, str]:
        return {cat.id: cat.name for cat in self.categories}

    @cached_property
    def _ground_truths_by_key(self) -> Dict[Tuple[int, int], List[GroundTruth]]:
        grouped = defaultdict(list)
        for gt in self.ground_truths:
            grouped[(gt.image_id, gt.category_id)].append(gt)
        return dict(grouped)

    def ground_truths_by_key(self) -> Dict[Tuple[int, int], List[GroundTruth]]:
        """Ground truths grouped by (image_id, category_id), file order kept"""
        return self._ground_truths_by_key


def _duplicates(values: Sequence[int]) -> List[int]:
    seen, dups = set(), []
    for v in values:
        if v in seen and v not in dups:
            dups.append(v)
        seen.add(v)
    return dups


def _read_json(path: PathLike) -> Any:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    try:
        with open(path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path} is not valid JSON: {e}") from e


def _as_number(value: Any, name: str) -> float:
    """JSON number to float; strings, booleans, null and non-finite values are rejected"""
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    return float(value)


def _as_int(value: Any, name: str) -> int:
    """JSON id to int; 3 and 3.0 are accepted, 1.7 and "3" are not"""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _records(doc: Dict[str, Any], key: str, path: PathLike) -> List[Dict[str, Any]]:
    records = doc[key]
    if not isinstance(records, list):
        raise ParseError(f"{path}: '{key}' must be a list, got {type(records).__name__}")
    for i, raw in enumerate(records):
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: {key} record #{i} must be an object, got {raw!r}")
    return records


def _parse_bbox(raw: Any, where: str) -> Tuple[float, float, float, float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise ParseError(f"{where}: bbox must be a list of 4 numbers, got {raw!r}")
    try:
        x, y, w, h = (_as_number(v, "bbox value") for v in raw)
    except ValueError as e:
        raise ParseError(f"{where}: bbox has non-numeric values {raw!r}") from e
    return x, y, w, h


def load_dataset(path: PathLike) -> Dataset:
    """
    Load a COCO instances annotation file.

    Raises:
        FileNotFoundError: if the file does not exist
        ParseError: if the document or one of its records is malformed
        ValidationError: on negative bbox extents or dangling references
    """
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: annotation document must be a JSON object")
    missing = [key for key in REQUIRED_TOP_LEVEL_KEYS if key not in doc]
    if missing:
        raise ParseError(f"{path}: missing top-level keys: {', '.join(missing)}")

    images = []
    for i, raw in enumerate(_records(doc, "images", path)):
        try:
            images.append(ImageInfo(
                _as_int(raw["id"], "id"),
                _as_int(raw.get("width", 0), "width"),
                _as_int(raw.get("height", 0), "height"),
            ))
        except (KeyError, ValueError) as e:
            raise ParseError(f"{path}: malformed image record #{i}: {e}") from e

    categories = []
    for i, raw in enumerate(_records(doc, "categories", path)):
        try:
            categories.append(Category(_as_int(raw["id"], "id"), str(raw.get("name", raw["id"]))))
        except (KeyError, ValueError) as e:
            raise ParseError(f"{path}: malformed category record #{i}: {e}") from e

    ground_truths = []
    for i, raw in enumerate(_records(doc, "annotations", path)):
        try:
            ann_id = _as_int(raw["id"], "id")
        except (KeyError, ValueError) as e:
            raise ParseError(f"{path}: malformed annotation record #{i}: {e}") from e
        try:
            image_id = _as_int(raw["image_id"], "image_id")
            category_id = _as_int(raw["category_id"], "category_id")
            bbox_raw = raw["bbox"]
            area = _as_number(raw["area"], "area") if "area" in raw else None
        except (KeyError, ValueError) as e:
            raise ParseError(f"{path}: malformed annotation {ann_id} (record #{i}): {e}") from e

        x, y, w, h = _parse_bbox(bbox_raw, f"{path}: annotation {ann_id}")
        if w < 0 or h < 0:
            raise ValidationError(f"Annotation {ann_id} has negative bbox width or height: {bbox_raw}", [ann_id])

        if area is None:
            logger.warning(f"⚠️ Annotation {ann_id} has no area field, using bbox area")
            area = w * h
        if area < 0:
            raise ValidationError(f"Annotation {ann_id} has negative area {area}", [ann_id])

        ground_truths.append(GroundTruth(
            id=ann_id,
            image_id=image_id,
            category_id=category_id,
            box=Box.from_xywh(x, y, w, h),
            area=area,
            iscrowd=bool(raw.get("iscrowd") or 0),
        ))

    extra = {k: v for k, v in doc.items() if k not in REQUIRED_TOP_LEVEL_KEYS}
    dataset = Dataset(tuple(images), tuple(categories), tuple(ground_truths), extra)

    crowd_count = sum(1 for gt in ground_truths if gt.iscrowd)
    logger.info(
        f"📊 Loaded {path}: {len(images)} images, {len(categories)} categories, "
        f"{len(ground_truths)} annotations ({crowd_count} crowd)"
    )
    return dataset


def load_detections(path: PathLike, ds: Dataset) -> List[Detection]:
    """
    Load a COCO detection-results file; ordinals follow file position.

    Raises:
        ParseError: on malformed entries
        ValidationError: listing entries with unknown image/category ids,
            out-of-range scores or negative bbox extents
    """
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise ParseError(f"{path}: detection results must be a JSON array")

    known_images = {img.id for img in ds.images}
    known_categories = {cat.id for cat in ds.categories}

    detections = []
    offending = []
    for i, raw in enumerate(doc):
        where = f"{path}: detection #{i}"
        if not isinstance(raw, dict):
            raise ParseError(f"{where} must be an object, got {raw!r}")
        try:
            image_id = _as_int(raw["image_id"], "image_id")
            category_id = _as_int(raw["category_id"], "category_id")
            score = _as_number(raw["score"], "score")
            bbox_raw = raw["bbox"]
        except (KeyError, ValueError) as e:
            raise ParseError(f"{where} is malformed ({e}): {raw!r}") from e
        x, y, w, h = _parse_bbox(bbox_raw, where)

        problems = []
        if image_id not in known_images:
            problems.append(f"unknown image_id {image_id}")
        if category_id not in known_categories:
            problems.append(f"unknown category_id {category_id}")
        if not 0.0 <= score <= 1.0:
            problems.append(f"score {score} outside [0, 1]")
        if w < 0 or h < 0:
            problems.append(f"negative bbox extent {bbox_raw}")
        if problems:
            offending.append({"index": i, "entry": raw, "problems": problems})
            continue

        detections.append(Detection(image_id, category_id, Box.from_xywh(x, y, w, h), score, i))

    if offending:
        preview = "; ".join(f"#{o['index']}: {', '.join(o['problems'])}" for o in offending[:5])
        raise ValidationError(f"{path}: {len(offending)} invalid detections ({preview})", offending)

    logger.info(f"📊 Loaded {len(detections)} detections from {path}")
    return detections


def gt_as_detections(ds: Dataset) -> List[Detection]:
    """Every ground truth (crowd included) as a score-1 detection, in annotation-id order"""
    ordered = sorted(ds.ground_truths, key=lambda gt: gt.id)
    return [
        Detection(gt.image_id, gt.category_id, gt.box, 1.0, ordinal)
        for ordinal, gt in enumerate(ordered)
    ]


def detections_to_records(dets: Sequence[Detection]) -> List[Dict[str, Any]]:
    return [
        {
            "image_id": d.image_id,
            "category_id": d.category_id,
            "bbox": list(d.box.to_xywh()),
            "score": d.score,
        }
        for d in dets
    ]


def write_detections(dets: Sequence[Detection], path: PathLike) -> Path:
    """Write a COCO results array; floats use repr precision so they reload exactly"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(detections_to_records(dets), f)
    logger.info(f"✅ Wrote {len(dets)} detections to {path}")
    return path
