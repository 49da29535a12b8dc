"""
COCO bounding-box AP evaluation.

Reimplements the reference COCO protocol (per image/category greedy matching,
cross-image accumulation, 101-point interpolated precision) and reports the
six headline metrics: mAP, AP50, AP75, APsmall, APmedium, APlarge.

Matching is independent per (image, category) and runs on a thread pool; the
inner loop is a numba kernel compiled with nogil=True so workers overlap.
Records are merged in a fixed order (category, area range, image id), which
keeps the summary identical for every thread count.
"""

import io
import json
import logging
import os
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numba import njit
from tabulate import tabulate

from .coco_io import Dataset, Detection, GroundTruth
from .exceptions import ContractViolation, ValidationError
from .geometry import as_box_array, box_areas, iou_matrix

logger = logging.getLogger(__name__)

AreaRange = Tuple[float, float]

METRIC_NAMES = ("map", "ap50", "ap75", "ap_small", "ap_medium", "ap_large")
METRIC_LABELS = {
    "map": "mAP",
    "ap50": "AP50",
    "ap75": "AP75",
    "ap_small": "APsmall",
    "ap_medium": "APmedium",
    "ap_large": "APlarge",
}


def _default_iou_thresholds() -> np.ndarray:
    return np.linspace(0.5, 0.95, int(np.round((0.95 - 0.5) / 0.05)) + 1, endpoint=True)


def _default_recall_thresholds() -> np.ndarray:
    return np.linspace(0.0, 1.00, int(np.round((1.00 - 0.0) / 0.01)) + 1, endpoint=True)


def _default_area_ranges() -> Tuple[Tuple[str, AreaRange], ...]:
    return (
        ("all", (0.0, 1e5 ** 2)),
        ("small", (0.0, 32.0 ** 2)),
        ("medium", (32.0 ** 2, 96.0 ** 2)),
        ("large", (96.0 ** 2, 1e5 ** 2)),
    )


@dataclass(frozen=True, eq=False)
class EvalParams:
    """Evaluation settings; defaults are the COCO bbox defaults"""
    iou_thresholds: np.ndarray = field(default_factory=_default_iou_thresholds)
    recall_thresholds: np.ndarray = field(default_factory=_default_recall_thresholds)
    area_ranges: Tuple[Tuple[str, AreaRange], ...] = field(default_factory=_default_area_ranges)
    max_dets: int = 100

    def __post_init__(self):
        for name in ("iou_thresholds", "recall_thresholds"):
            values = np.asarray(getattr(self, name), dtype=np.float64)
            if values.ndim != 1 or len(values) == 0 or np.any(np.diff(values) <= 0):
                raise ValidationError(f"{name} must be a non-empty strictly increasing sequence")
            object.__setattr__(self, name, values)
        names = [name for name, _ in self.area_ranges]
        if "all" not in names or len(set(names)) != len(names):
            raise ValidationError(f"area_ranges need unique names including 'all', got {names}")
        if self.max_dets <= 0:
            raise ValidationError(f"max_dets must be positive, got {self.max_dets}")

    @property
    def area_names(self) -> List[str]:
        return [name for name, _ in self.area_ranges]

    def area_range(self, name: str) -> AreaRange:
        return dict(self.area_ranges)[name]

    def threshold_index(self, value: float) -> int:
        hits = np.flatnonzero(np.isclose(self.iou_thresholds, value))
        if len(hits) == 0:
            raise ValidationError(f"IOU threshold {value} is not among the evaluation thresholds")
        return int(hits[0])


@dataclass
class MatchRecord:
    """
    Matching outcome for one image x category x area range.

    det_* arrays follow score order (already truncated to max_dets), gt_*
    arrays follow the non-ignored-first order. det_matches holds the matched
    ground-truth annotation id (-1 when unmatched); gt_matches holds the
    matched detection ordinal (-1 when unmatched). Rows index IOU thresholds.
    """
    image_id: int
    category_id: int
    area_name: str
    det_ordinals: np.ndarray
    det_scores: np.ndarray
    det_matches: np.ndarray
    det_ignore: np.ndarray
    gt_ids: np.ndarray
    gt_ignore: np.ndarray
    gt_matches: np.ndarray


@dataclass
class PrecisionTensors:
    """precision is [threshold x recall level x category x area range]; -1 marks empty scopes"""
    precision: np.ndarray
    recall: np.ndarray
    category_ids: List[int]
    area_names: List[str]


@dataclass(frozen=True)
class ApSummary:
    """The six headline metrics; -1 means no ground truth in scope"""
    map: float
    ap50: float
    ap75: float
    ap_small: float
    ap_medium: float
    ap_large: float

    metric_names = METRIC_NAMES

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@njit(nogil=True, cache=True)
def _greedy_match(ious, gt_ignore, gt_crowd, thresholds):
    """
    Greedy matching over score-sorted detections (rows) and ignore-last
    ground truths (columns), one pass per IOU threshold.
    """
    n_thr = thresholds.shape[0]
    n_det, n_gt = ious.shape
    det_match = np.full((n_thr, n_det), -1, np.int64)
    gt_match = np.full((n_thr, n_gt), -1, np.int64)
    det_ignore = np.zeros((n_thr, n_det), np.bool_)
    for ti in range(n_thr):
        for d in range(n_det):
            best = min(thresholds[ti], 1.0 - 1e-10)
            m = -1
            for g in range(n_gt):
                # matched non-crowd ground truths are taken
                if gt_match[ti, g] >= 0 and not gt_crowd[g]:
                    continue
                # holding a regular match, ignored ground truths cannot displace it
                if m > -1 and not gt_ignore[m] and gt_ignore[g]:
                    break
                if ious[d, g] < best:
                    continue
                best = ious[d, g]
                m = g
            if m == -1:
                continue
            det_ignore[ti, d] = gt_ignore[m]
            det_match[ti, d] = m
            gt_match[ti, m] = d
    return det_match, gt_match, det_ignore


def _outside(areas: np.ndarray, area_range: AreaRange) -> np.ndarray:
    return (areas < area_range[0]) | (areas > area_range[1])


def _lookup_ids(indices: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Map kernel indices (-1 = none) to ids (-1 = none)"""
    if ids.size == 0:
        return np.full(indices.shape, -1, np.int64)
    return np.where(indices < 0, -1, ids[np.maximum(indices, 0)])


def _match_arrays(
    image_id: int,
    category_id: int,
    det_boxes: np.ndarray,
    det_scores: np.ndarray,
    det_ordinals: np.ndarray,
    gt_boxes: np.ndarray,
    gt_areas: np.ndarray,
    gt_crowd: np.ndarray,
    gt_ids: np.ndarray,
    thresholds: np.ndarray,
    area_ranges: Sequence[Tuple[str, AreaRange]],
) -> List[MatchRecord]:
    """
    Match one image/category for every area range.

    Detections must already be in score order and truncated to max_dets.
    """
    ious = iou_matrix(det_boxes, gt_boxes, gt_crowd)
    det_areas = box_areas(det_boxes)

    records = []
    for area_name, area_range in area_ranges:
        gt_ignore = gt_crowd | _outside(gt_areas, area_range)
        order = np.argsort(gt_ignore, kind="mergesort")
        gt_ignore_sorted = gt_ignore[order]

        det_match, gt_match, det_ignore = _greedy_match(
            np.ascontiguousarray(ious[:, order]),
            gt_ignore_sorted,
            np.ascontiguousarray(gt_crowd[order]),
            thresholds,
        )
        # unmatched detections outside the area range do not count
        unmatched = det_match < 0
        det_ignore = det_ignore | (unmatched & _outside(det_areas, area_range)[None, :])

        gt_ids_sorted = gt_ids[order]
        records.append(MatchRecord(
            image_id=image_id,
            category_id=category_id,
            area_name=area_name,
            det_ordinals=det_ordinals,
            det_scores=det_scores,
            det_matches=_lookup_ids(det_match, gt_ids_sorted),
            det_ignore=det_ignore,
            gt_ids=gt_ids_sorted,
            gt_ignore=gt_ignore_sorted,
            gt_matches=_lookup_ids(gt_match, det_ordinals),
        ))
    return records


def _score_order(scores: np.ndarray, ordinals: np.ndarray) -> np.ndarray:
    """Descending score, ties by ascending ordinal"""
    return np.lexsort((ordinals, -scores))


def match_image_category(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    params: EvalParams,
    area_range: Union[str, AreaRange],
) -> Optional[MatchRecord]:
    """
    Match the detections and ground truths of a single image and category.

    Returns None when both lists are empty (nothing to evaluate).

    Raises:
        ContractViolation: if the inputs span several images or categories
    """
    keys = {(d.image_id, d.category_id) for d in dets} | {(g.image_id, g.category_id) for g in gts}
    if len(keys) > 1:
        raise ContractViolation(f"match_image_category got mixed image/category input: {sorted(keys)}")
    if not keys:
        return None
    image_id, category_id = keys.pop()

    if isinstance(area_range, str):
        area_name, bounds = area_range, params.area_range(area_range)
    else:
        area_name, bounds = "custom", (float(area_range[0]), float(area_range[1]))

    scores = np.array([d.score for d in dets], dtype=np.float64)
    ordinals = np.array([d.ordinal for d in dets], dtype=np.int64)
    keep = _score_order(scores, ordinals)[: params.max_dets]

    records = _match_arrays(
        image_id,
        category_id,
        as_box_array([dets[i].box for i in keep]),
        scores[keep],
        ordinals[keep],
        as_box_array([g.box for g in gts]),
        np.array([g.area for g in gts], dtype=np.float64),
        np.array([g.iscrowd for g in gts], dtype=bool),
        np.array([g.id for g in gts], dtype=np.int64),
        params.iou_thresholds,
        [(area_name, bounds)],
    )
    return records[0]


def accumulate(
    records: Sequence[MatchRecord],
    params: EvalParams,
    category_ids: Optional[Sequence[int]] = None,
) -> PrecisionTensors:
    """
    Turn match records into interpolated precision per threshold, recall
    level, category and area range.

    Per scope, detections are concatenated in ascending image id order and
    stably sorted by descending score; ignored detections count as neither
    TP nor FP. Scopes without non-ignored ground truth stay at -1.
    """
    if category_ids is None:
        category_ids = sorted({r.category_id for r in records})
    category_ids = list(category_ids)
    area_names = params.area_names
    cat_index = {c: k for k, c in enumerate(category_ids)}
    area_index = {a: i for i, a in enumerate(area_names)}

    n_thr = len(params.iou_thresholds)
    n_rec = len(params.recall_thresholds)
    precision = -np.ones((n_thr, n_rec, len(category_ids), len(area_names)))
    recall = -np.ones((n_thr, len(category_ids), len(area_names)))

    scopes: Dict[Tuple[int, int], List[MatchRecord]] = defaultdict(list)
    for r in records:
        if r.category_id not in cat_index or r.area_name not in area_index:
            raise ContractViolation(f"Record for unknown scope ({r.category_id}, {r.area_name})")
        scopes[(cat_index[r.category_id], area_index[r.area_name])].append(r)

    for (k, a), scope in sorted(scopes.items()):
        scope = sorted(scope, key=lambda r: r.image_id)
        gt_ignore = np.concatenate([r.gt_ignore for r in scope])
        npig = np.count_nonzero(~gt_ignore)
        if npig == 0:
            continue

        scores = np.concatenate([r.det_scores for r in scope])
        order = np.argsort(-scores, kind="mergesort")
        det_matches = np.concatenate([r.det_matches for r in scope], axis=1)[:, order]
        det_ignore = np.concatenate([r.det_ignore for r in scope], axis=1)[:, order]

        tps = (det_matches >= 0) & ~det_ignore
        fps = (det_matches < 0) & ~det_ignore
        tp_sum = np.cumsum(tps, axis=1).astype(np.float64)
        fp_sum = np.cumsum(fps, axis=1).astype(np.float64)

        for t in range(n_thr):
            tp, fp = tp_sum[t], fp_sum[t]
            n_det = len(tp)
            rc = tp / npig
            pr = tp / (fp + tp + np.spacing(1))
            recall[t, k, a] = rc[-1] if n_det else 0

            q = np.zeros(n_rec)
            if n_det:
                # precision envelope: running maximum from the right
                pr = np.maximum.accumulate(pr[::-1])[::-1]
                inds = np.searchsorted(rc, params.recall_thresholds, side="left")
                valid = inds < n_det
                q[valid] = pr[inds[valid]]
            precision[t, :, k, a] = q

    return PrecisionTensors(precision, recall, category_ids, list(area_names))


def _mean_valid(values: np.ndarray) -> float:
    valid = values[values > -1]
    return float(np.mean(valid)) if valid.size else -1.0


def summarize(tensors: PrecisionTensors, params: EvalParams) -> ApSummary:
    p = tensors.precision
    all_idx = tensors.area_names.index("all")

    def area_mean(name: str) -> float:
        if name not in tensors.area_names:
            return -1.0
        return _mean_valid(p[:, :, :, tensors.area_names.index(name)])

    return ApSummary(
        map=_mean_valid(p[:, :, :, all_idx]),
        ap50=_mean_valid(p[params.threshold_index(0.5), :, :, all_idx]),
        ap75=_mean_valid(p[params.threshold_index(0.75), :, :, all_idx]),
        ap_small=area_mean("small"),
        ap_medium=area_mean("medium"),
        ap_large=area_mean("large"),
    )


@dataclass
class _GtGroup:
    boxes: np.ndarray
    areas: np.ndarray
    crowd: np.ndarray
    ids: np.ndarray


class CocoEvaluator:
    """
    Evaluator bound to one dataset. Ground truth is grouped once, so the
    same instance can score many perturbed detection sets.
    """

    def __init__(self, ds: Dataset, params: Optional[EvalParams] = None, threads: Optional[int] = None):
        self._ds = ds
        self._params = params or EvalParams()
        self._threads = max(1, threads or os.cpu_count() or 1)
        self._image_ids = ds.image_ids()
        self._category_ids = ds.category_ids()
        self._known_images = set(self._image_ids)
        self._known_categories = set(self._category_ids)
        self._gt_groups: Dict[Tuple[int, int], _GtGroup] = {
            key: _GtGroup(
                boxes=as_box_array([g.box for g in gts]),
                areas=np.array([g.area for g in gts], dtype=np.float64),
                crowd=np.array([g.iscrowd for g in gts], dtype=bool),
                ids=np.array([g.id for g in gts], dtype=np.int64),
            )
            for key, gts in ds.ground_truths_by_key().items()
        }
        self._empty_gt = _GtGroup(np.zeros((0, 4)), np.zeros(0), np.zeros(0, dtype=bool), np.zeros(0, dtype=np.int64))

    @property
    def dataset(self) -> Dataset:
        return self._ds

    @property
    def params(self) -> EvalParams:
        return self._params

    @property
    def threads(self) -> int:
        return self._threads

    def _group_detections(self, dets: Sequence[Detection]) -> Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        unknown = [
            d.ordinal for d in dets
            if d.image_id not in self._known_images or d.category_id not in self._known_categories
        ]
        if unknown:
            raise ValidationError(f"{len(unknown)} detections reference ids absent from the dataset", unknown)

        grouped = defaultdict(list)
        for d in dets:
            grouped[(d.image_id, d.category_id)].append(d)

        out = {}
        for key, group in grouped.items():
            scores = np.array([d.score for d in group], dtype=np.float64)
            ordinals = np.array([d.ordinal for d in group], dtype=np.int64)
            keep = _score_order(scores, ordinals)[: self._params.max_dets]
            boxes = as_box_array([group[i].box for i in keep])
            out[key] = (boxes, scores[keep], ordinals[keep])
        return out

    def _match_keys(self, keys: List[Tuple[int, int]], det_groups) -> List[MatchRecord]:
        empty_dets = (np.zeros((0, 4)), np.zeros(0), np.zeros(0, dtype=np.int64))
        records = []
        for key in keys:
            boxes, scores, ordinals = det_groups.get(key, empty_dets)
            gt = self._gt_groups.get(key, self._empty_gt)
            records.extend(_match_arrays(
                key[0], key[1], boxes, scores, ordinals,
                gt.boxes, gt.areas, gt.crowd, gt.ids,
                self._params.iou_thresholds, self._params.area_ranges,
            ))
        return records

    def match_all(self, dets: Sequence[Detection]) -> List[MatchRecord]:
        """Match records for every (image, category) pair with detections or ground truth"""
        det_groups = self._group_detections(dets)
        keys = sorted(set(self._gt_groups) | set(det_groups))

        if self._threads == 1 or len(keys) < 2 * self._threads:
            return self._match_keys(keys, det_groups)

        chunk = -(-len(keys) // self._threads)
        chunks = [keys[i:i + chunk] for i in range(0, len(keys), chunk)]
        with ThreadPoolExecutor(max_workers=self._threads) as pool:
            parts = list(pool.map(lambda ks: self._match_keys(ks, det_groups), chunks))
        return [record for part in parts for record in part]

    def evaluate_tensors(self, dets: Sequence[Detection]) -> PrecisionTensors:
        return accumulate(self.match_all(dets), self._params, self._category_ids)

    def evaluate(self, dets: Sequence[Detection]) -> ApSummary:
        start = time.time()
        summary = summarize(self.evaluate_tensors(dets), self._params)
        logger.debug(f"Evaluated {len(dets)} detections in {time.time() - start:.2f}s ({self._threads} threads)")
        return summary


def evaluate(
    ds: Dataset,
    dets: Sequence[Detection],
    params: Optional[EvalParams] = None,
    threads: Optional[int] = None,
) -> ApSummary:
    """Match, accumulate and summarize detections against a dataset"""
    return CocoEvaluator(ds, params, threads).evaluate(dets)


def format_summary(summary: ApSummary, fmt: str = "plain") -> str:
    """Render the six metrics as plain/table (tabulate), json or csv text"""
    values = summary.as_dict()
    if fmt == "json":
        return json.dumps(values, indent=2)
    if fmt == "csv":
        out = io.StringIO()
        out.write("metric,value\n")
        for name, value in values.items():
            out.write(f"{name},{value:.6f}\n")
        return out.getvalue().rstrip("\n")
    if fmt not in ("plain", "table"):
        raise ValidationError(f"Unknown summary format '{fmt}'")
    rows = [(METRIC_LABELS[name], value) for name, value in values.items()]
    return tabulate(
        rows,
        headers=["metric", "value"],
        tablefmt="plain" if fmt == "plain" else "fancy_grid",
        floatfmt=".6f",
    )
