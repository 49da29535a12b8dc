"""
IOU decay study on randomly generated boxes.

Two shift modes: proportional (every coordinate moves by t times the box's
own width/height) and fixed (every box moves by the same number of pixels).
Proportional decay does not depend on box shape; fixed decay does.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import ValidationError
from .geometry import (
    Box,
    Direction,
    as_box_array,
    paired_iou,
    shift_boxes,
    shift_boxes_proportional,
)

logger = logging.getLogger(__name__)

DEFAULT_PROPORTIONAL_OFFSETS = tuple(np.round(np.arange(11) * 0.1, 10))
DEFAULT_FIXED_OFFSETS = tuple(float(o) for o in range(11))


@dataclass(frozen=True)
class RandomBoxConfig:
    count: int = 1000
    width_range: Tuple[float, float] = (4.0, 256.0)
    height_range: Tuple[float, float] = (4.0, 256.0)
    origin_range: Tuple[float, float] = (0.0, 640.0)
    seed: int = 0

    def __post_init__(self):
        if self.count <= 0:
            raise ValidationError(f"Box count must be positive, got {self.count}", [self.count])
        for name in ("width_range", "height_range", "origin_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValidationError(f"{name} must be a non-empty interval, got ({lo}, {hi})", [name])
        if self.width_range[0] <= 0 or self.height_range[0] <= 0:
            raise ValidationError("Box sizes must be positive")


def generate_boxes(cfg: RandomBoxConfig) -> List[Box]:
    """Uniform origins and sizes drawn from a generator seeded with cfg.seed"""
    rng = np.random.default_rng(cfg.seed)
    x = rng.uniform(*cfg.origin_range, size=cfg.count)
    y = rng.uniform(*cfg.origin_range, size=cfg.count)
    w = rng.uniform(*cfg.width_range, size=cfg.count)
    h = rng.uniform(*cfg.height_range, size=cfg.count)
    logger.debug(f"Generated {cfg.count} boxes (seed {cfg.seed})")
    return [Box(float(xi), float(yi), float(xi + wi), float(yi + hi)) for xi, yi, wi, hi in zip(x, y, w, h)]


def closed_form_proportional(t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """IOU of any box with itself shifted by fraction t of its size"""
    s = (1.0 - np.asarray(t, dtype=np.float64)) ** 2
    out = s / (2.0 - s)
    return float(out) if out.ndim == 0 else out


@dataclass
class DecayTable:
    """Per-box IOU at each offset: ious[i, j] is box j at offsets[i]"""
    mode: str
    offsets: np.ndarray
    ious: np.ndarray
    boxes: np.ndarray = field(repr=False)

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame({
            "offset": self.offsets,
            "mean": self.ious.mean(axis=1),
            "min": self.ious.min(axis=1),
            "max": self.ious.max(axis=1),
        })

    def per_box_series(self, limit: int = 5) -> Dict[str, List[Tuple[float, float]]]:
        """Curves of up to `limit` boxes spread evenly over the range of box areas"""
        areas = (self.boxes[:, 2] - self.boxes[:, 0]) * (self.boxes[:, 3] - self.boxes[:, 1])
        by_area = np.argsort(areas, kind="stable")
        picks = np.unique(np.round(np.linspace(0, len(by_area) - 1, min(limit, len(by_area)))).astype(int))
        series = {}
        for j in by_area[picks]:
            w = self.boxes[j, 2] - self.boxes[j, 0]
            h = self.boxes[j, 3] - self.boxes[j, 1]
            label = f"#{j} {w:.0f}x{h:.0f} px"
            series[label] = list(zip(self.offsets.tolist(), self.ious[:, j].tolist()))
        return series


def _offsets_array(offsets: Iterable[float]) -> np.ndarray:
    values = np.unique(np.asarray(list(offsets), dtype=np.float64))
    if values.size == 0:
        raise ValidationError("At least one offset is required")
    return values


def iou_decay_proportional(
    boxes: Sequence[Box],
    offsets: Iterable[float] = DEFAULT_PROPORTIONAL_OFFSETS,
) -> DecayTable:
    arr = as_box_array(boxes)
    offsets = _offsets_array(offsets)
    ious = np.stack([paired_iou(arr, shift_boxes_proportional(arr, t)) for t in offsets])
    return DecayTable("proportional", offsets, ious, arr)


def iou_decay_fixed(
    boxes: Sequence[Box],
    offsets: Iterable[float] = DEFAULT_FIXED_OFFSETS,
    direction: Direction = Direction.DOWN_RIGHT,
) -> DecayTable:
    arr = as_box_array(boxes)
    offsets = _offsets_array(offsets)
    ious = np.stack([paired_iou(arr, shift_boxes(arr, direction.dx, direction.dy, o)) for o in offsets])
    return DecayTable(f"fixed {direction.label}", offsets, ious, arr)
