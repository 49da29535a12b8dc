"""
Box geometry: IOU and the perturbations applied to boxes.

Boxes are corner-form (x_l, y_l, x_r, y_r) in continuous pixel coordinates,
with area = W x H (no +1 pixel correction). Image y grows downwards, so
"up" decreases y. Perturbed boxes are never clipped to image bounds.

Scalar functions work on Box values; the *_boxes / iou_matrix functions are
their numpy counterparts on (N, 4) float64 arrays and use the same arithmetic,
so both paths agree bit for bit.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from .exceptions import ValidationError

ArrayLike = Union[np.ndarray, float, int]


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle; zero-area boxes are allowed"""
    x_l: float
    y_l: float
    x_r: float
    y_r: float

    def __post_init__(self):
        if self.x_r < self.x_l or self.y_r < self.y_l:
            raise ValidationError(
                f"Box has negative extent: ({self.x_l}, {self.y_l}, {self.x_r}, {self.y_r})",
                [self],
            )

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box":
        if w < 0 or h < 0:
            raise ValidationError(f"bbox has negative width or height: [{x}, {y}, {w}, {h}]")
        return cls(float(x), float(y), float(x) + float(w), float(y) + float(h))

    def to_xywh(self) -> Tuple[float, float, float, float]:
        return (self.x_l, self.y_l, self.width(), self.height())

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x_l, self.y_l, self.x_r, self.y_r)

    def width(self) -> float:
        return self.x_r - self.x_l

    def height(self) -> float:
        return self.y_r - self.y_l

    def area(self) -> float:
        return self.width() * self.height()


class Direction(Enum):
    """The eight shift directions, valued by their (dx, dy) unit displacement"""
    LEFT = (-1, 0)
    RIGHT = (1, 0)
    UP = (0, -1)
    DOWN = (0, 1)
    UP_LEFT = (-1, -1)
    UP_RIGHT = (1, -1)
    DOWN_LEFT = (-1, 1)
    DOWN_RIGHT = (1, 1)

    @property
    def dx(self) -> int:
        return self.value[0]

    @property
    def dy(self) -> int:
        return self.value[1]

    @property
    def label(self) -> str:
        """Command-line spelling, e.g. 'down-right'"""
        return self.name.lower().replace("_", "-")

    @property
    def is_diagonal(self) -> bool:
        return self.dx != 0 and self.dy != 0

    def opposite(self) -> "Direction":
        return Direction((-self.dx, -self.dy))

    @classmethod
    def from_name(cls, name: str) -> "Direction":
        key = name.strip().lower().replace("_", "-").replace(" ", "-")
        key = key.replace("top", "up").replace("bottom", "down")
        for direction in cls:
            if direction.label == key:
                return direction
        raise ValidationError(f"Unknown direction '{name}'", [name])


# Canonical order used for random draws and for the direction matrix
DIRECTIONS = (
    Direction.LEFT,
    Direction.RIGHT,
    Direction.UP,
    Direction.DOWN,
    Direction.UP_LEFT,
    Direction.UP_RIGHT,
    Direction.DOWN_LEFT,
    Direction.DOWN_RIGHT,
)

# (8, 2) table of unit displacements indexed like DIRECTIONS
DIRECTION_STEPS = np.array([d.value for d in DIRECTIONS], dtype=np.float64)


def _check_offset(offset: float):
    if offset < 0:
        raise ValidationError(f"Offset must be non-negative, got {offset}", [offset])


def _check_fraction(t: float):
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"Proportional offset must lie in [0, 1], got {t}", [t])


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 when both boxes are degenerate"""
    iw = min(a.x_r, b.x_r) - max(a.x_l, b.x_l)
    ih = min(a.y_r, b.y_r) - max(a.y_l, b.y_l)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = a.area() + b.area() - inter
    return inter / union if union > 0 else 0.0


def iou_crowd(det: Box, crowd: Box) -> float:
    """Intersection over the detection's own area (crowd-region overlap)"""
    iw = min(det.x_r, crowd.x_r) - max(det.x_l, crowd.x_l)
    ih = min(det.y_r, crowd.y_r) - max(det.y_l, crowd.y_l)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    det_area = det.area()
    return inter / det_area if det_area > 0 else 0.0


def shift_proportional(b: Box, t: float) -> Box:
    _check_fraction(t)
    dw = t * b.width()
    dh = t * b.height()
    return Box(b.x_l + dw, b.y_l + dh, b.x_r + dw, b.y_r + dh)


def shift_direction(b: Box, d: Direction, offset: float) -> Box:
    """Translate by the full offset along each axis the direction moves in"""
    _check_offset(offset)
    sx = d.dx * offset
    sy = d.dy * offset
    return Box(b.x_l + sx, b.y_l + sy, b.x_r + sx, b.y_r + sy)


def enlarge(b: Box, offset: float) -> Box:
    """Keep the top-left corner, push the bottom-right corner outwards"""
    _check_offset(offset)
    return Box(b.x_l, b.y_l, b.x_r + offset, b.y_r + offset)


def shrink(b: Box, offset: float) -> Box:
    """Pull the bottom-right corner inwards; each extent stops at zero"""
    _check_offset(offset)
    return Box(b.x_l, b.y_l, max(b.x_r - offset, b.x_l), max(b.y_r - offset, b.y_l))


# Array counterparts ---------------------------------------------------------

def as_box_array(boxes) -> np.ndarray:
    """Coerce boxes (array, sequence of Box or of 4-tuples) to a (N, 4) float64 array"""
    if isinstance(boxes, np.ndarray):
        return boxes.astype(np.float64, copy=False).reshape(-1, 4)
    rows = [b.as_tuple() if isinstance(b, Box) else tuple(b) for b in boxes]
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


def box_areas(boxes: np.ndarray) -> np.ndarray:
    return (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])


def iou_matrix(dets: np.ndarray, gts: np.ndarray, crowd: np.ndarray = None) -> np.ndarray:
    """
    (N, M) overlap matrix between detections and ground truths.

    Columns flagged in `crowd` use intersection over detection area
    (iou_crowd); the rest use plain iou.
    """
    dets = as_box_array(dets)
    gts = as_box_array(gts)
    n, m = len(dets), len(gts)
    if n == 0 or m == 0:
        return np.zeros((n, m), dtype=np.float64)

    iw = np.minimum(dets[:, None, 2], gts[None, :, 2]) - np.maximum(dets[:, None, 0], gts[None, :, 0])
    ih = np.minimum(dets[:, None, 3], gts[None, :, 3]) - np.maximum(dets[:, None, 1], gts[None, :, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)

    det_area = box_areas(dets)[:, None]
    union = det_area + box_areas(gts)[None, :] - inter
    if crowd is not None:
        crowd = np.asarray(crowd, dtype=bool).reshape(1, m)
        union = np.where(crowd, np.broadcast_to(det_area, union.shape), union)

    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / union, 0.0)


def paired_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise iou of two equally long box arrays"""
    a = as_box_array(a)
    b = as_box_array(b)
    if a.shape != b.shape:
        raise ValidationError(f"Box arrays differ in length: {len(a)} vs {len(b)}")
    iw = np.minimum(a[:, 2], b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    ih = np.minimum(a[:, 3], b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = box_areas(a) + box_areas(b) - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / union, 0.0)


def shift_boxes(boxes: np.ndarray, dx: ArrayLike, dy: ArrayLike, offset: float) -> np.ndarray:
    """
    Translate every box by (dx * offset, dy * offset).

    dx and dy are scalars or per-box (N,) arrays of unit steps.
    """
    _check_offset(offset)
    boxes = as_box_array(boxes)
    sx = np.broadcast_to(np.asarray(dx, dtype=np.float64) * offset, (len(boxes),))
    sy = np.broadcast_to(np.asarray(dy, dtype=np.float64) * offset, (len(boxes),))
    return boxes + np.stack([sx, sy, sx, sy], axis=1)


def shift_boxes_proportional(boxes: np.ndarray, t: float) -> np.ndarray:
    _check_fraction(t)
    boxes = as_box_array(boxes)
    dw = t * (boxes[:, 2] - boxes[:, 0])
    dh = t * (boxes[:, 3] - boxes[:, 1])
    return boxes + np.stack([dw, dh, dw, dh], axis=1)


def enlarge_boxes(boxes: np.ndarray, offset: float) -> np.ndarray:
    _check_offset(offset)
    out = as_box_array(boxes).copy()
    out[:, 2:] += offset
    return out


def shrink_boxes(boxes: np.ndarray, offset: float) -> np.ndarray:
    _check_offset(offset)
    out = as_box_array(boxes).copy()
    out[:, 2] = np.maximum(out[:, 2] - offset, out[:, 0])
    out[:, 3] = np.maximum(out[:, 3] - offset, out[:, 1])
    return out
