"""
Perturbation sweeps: evaluate detections after translating or scaling every
box by each offset, and report the drop relative to the unperturbed baseline.

Each offset perturbs the original detections (no cumulative shifting). In
the random-direction regime a detection's direction depends only on
(seed, ordinal), so it is the same at every offset and independent of
iteration order.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .coco_io import Dataset, Detection
from .evaluator import METRIC_LABELS, METRIC_NAMES, ApSummary, CocoEvaluator
from .exceptions import ValidationError
from .geometry import (
    DIRECTION_STEPS,
    DIRECTIONS,
    Box,
    Direction,
    as_box_array,
    enlarge_boxes,
    shift_boxes,
    shrink_boxes,
)

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


class Kind(Enum):
    TRANSLATE = "translate"
    ENLARGE = "enlarge"
    SHRINK = "shrink"


class Regime(Enum):
    RANDOM = "random"
    FIXED = "fixed"


def _as_kind(kind: Union[str, Kind]) -> Kind:
    try:
        return kind if isinstance(kind, Kind) else Kind(str(kind).lower())
    except ValueError:
        raise ValidationError(f"Unknown perturbation kind '{kind}'", [kind])


def _as_regime(regime: Union[str, Regime, None]) -> Optional[Regime]:
    if regime is None or isinstance(regime, Regime):
        return regime
    try:
        return Regime(str(regime).lower())
    except ValueError:
        raise ValidationError(f"Unknown regime '{regime}'", [regime])


@dataclass(frozen=True)
class PerturbationSpec:
    kind: Kind
    offset: float
    regime: Optional[Regime] = None
    direction: Optional[Direction] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", _as_kind(self.kind))
        object.__setattr__(self, "regime", _as_regime(self.regime))
        if isinstance(self.direction, str):
            object.__setattr__(self, "direction", Direction.from_name(self.direction))

        if self.offset < 0 or not math.isfinite(self.offset):
            raise ValidationError(f"Offset must be a non-negative number, got {self.offset}", [self.offset])
        if self.kind is Kind.TRANSLATE and self.regime is None:
            raise ValidationError("Translation needs a regime (random or fixed)")
        if self.kind is not Kind.TRANSLATE and self.regime is not None:
            raise ValidationError(f"{self.kind.value} takes no regime")
        if self.regime is Regime.FIXED and self.direction is None:
            raise ValidationError("Fixed-direction translation needs a direction")
        if self.regime is not Regime.FIXED and self.direction is not None:
            raise ValidationError("A direction is only meaningful for the fixed regime")

    @property
    def regime_label(self) -> str:
        return self.regime.value if self.regime else ""

    @property
    def direction_label(self) -> str:
        return self.direction.label if self.direction else ""


def random_direction_indices(ordinals: np.ndarray, seed: int) -> np.ndarray:
    """
    Uniform direction index (into DIRECTIONS) per detection ordinal.

    Draws come from a counter-based Philox stream keyed by the seed; the
    k-th draw belongs to ordinal k, whatever order detections arrive in.
    """
    ordinals = np.asarray(ordinals, dtype=np.int64)
    if ordinals.size == 0:
        return np.zeros(0, dtype=np.int64)
    if ordinals.min() < 0:
        raise ValidationError("Detection ordinals must be non-negative")
    rng = np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))
    draws = rng.integers(0, len(DIRECTIONS), size=int(ordinals.max()) + 1)
    return draws[ordinals]


def perturb_boxes(boxes: np.ndarray, ordinals: np.ndarray, spec: PerturbationSpec) -> np.ndarray:
    """Array form of perturb_detections"""
    if spec.kind is Kind.ENLARGE:
        return enlarge_boxes(boxes, spec.offset)
    if spec.kind is Kind.SHRINK:
        return shrink_boxes(boxes, spec.offset)
    if spec.regime is Regime.FIXED:
        return shift_boxes(boxes, spec.direction.dx, spec.direction.dy, spec.offset)
    steps = DIRECTION_STEPS[random_direction_indices(ordinals, spec.seed)]
    return shift_boxes(boxes, steps[:, 0], steps[:, 1], spec.offset)


def perturb_detections(dets: Sequence[Detection], spec: PerturbationSpec) -> List[Detection]:
    """Transform every detection's box; ids, scores and ordinals are untouched"""
    if not dets:
        return []
    boxes = as_box_array([d.box for d in dets])
    ordinals = np.array([d.ordinal for d in dets], dtype=np.int64)
    moved = perturb_boxes(boxes, ordinals, spec).tolist()
    return [
        Detection(d.image_id, d.category_id, Box(*row), d.score, d.ordinal)
        for d, row in zip(dets, moved)
    ]


def relative_drop(baseline: ApSummary, summary: ApSummary) -> Dict[str, float]:
    """Percent drop per metric; NaN where the baseline is not positive"""
    drops = {}
    for name in METRIC_NAMES:
        base = getattr(baseline, name)
        drops[name] = 100.0 * (base - getattr(summary, name)) / base if base > 0 else float("nan")
    return drops


@dataclass
class SweepRow:
    spec: PerturbationSpec
    summary: ApSummary
    relative_drop: Dict[str, float]


@dataclass
class SweepResult:
    baseline: ApSummary
    rows: List[SweepRow] = field(default_factory=list)

    @property
    def offsets(self) -> List[float]:
        return [row.spec.offset for row in self.rows]

    def to_frame(self) -> pd.DataFrame:
        records = []
        for row in self.rows:
            record = {
                "offset": float(row.spec.offset),
                "kind": row.spec.kind.value,
                "regime": row.spec.regime_label,
                "direction": row.spec.direction_label,
            }
            record.update(row.summary.as_dict())
            record.update({f"drop_{name}": value for name, value in row.relative_drop.items()})
            records.append(record)
        columns = ["offset", "kind", "regime", "direction", *METRIC_NAMES, *(f"drop_{m}" for m in METRIC_NAMES)]
        return pd.DataFrame(records, columns=columns)

    def drop_table(self) -> List[List]:
        """Rows for tabulate: offset then "<value> (<signed change>%)" per metric"""
        table = []
        for row in self.rows:
            cells = [f"{row.spec.offset:g}"]
            for name in METRIC_NAMES:
                value = getattr(row.summary, name)
                drop = row.relative_drop[name]
                cells.append(f"{value:.4f}" if math.isnan(drop) else f"{value:.4f} ({0.0 - drop:+.1f}%)")
            table.append(cells)
        return table

    @staticmethod
    def drop_table_headers() -> List[str]:
        return ["offset", *(METRIC_LABELS[m] for m in METRIC_NAMES)]


def _normalize_offsets(offsets: Iterable[float]) -> List[float]:
    values = sorted({float(o) for o in offsets})
    bad = [o for o in values if o < 0 or not math.isfinite(o)]
    if bad:
        raise ValidationError(f"Offsets must be non-negative, got {bad}", bad)
    if not values:
        raise ValidationError("At least one offset is required")
    return values


def _evaluator_for(ds: Dataset, evaluator: Optional[CocoEvaluator], threads: Optional[int]) -> CocoEvaluator:
    if evaluator is not None:
        if evaluator.dataset is not ds:
            raise ValidationError("Evaluator was built for a different dataset")
        return evaluator
    return CocoEvaluator(ds, threads=threads)


def _run(
    evaluator: CocoEvaluator,
    dets: Sequence[Detection],
    specs: List[PerturbationSpec],
    baseline: Optional[ApSummary],
) -> SweepResult:
    if baseline is None:
        logger.info(f"📊 Evaluating unperturbed baseline ({len(dets)} detections)")
        baseline = evaluator.evaluate(dets)

    result = SweepResult(baseline=baseline)
    for spec in specs:
        summary = baseline if spec.offset == 0 else evaluator.evaluate(perturb_detections(dets, spec))
        drops = relative_drop(baseline, summary)
        result.rows.append(SweepRow(spec, summary, drops))
        logger.info(
            f"📐 {spec.kind.value} {spec.regime_label} {spec.direction_label} offset {spec.offset:g}: "
            f"mAP {summary.map:.4f} (drop {drops['map']:.2f}%)"
        )
    return result


def run_sweep(
    ds: Dataset,
    dets: Sequence[Detection],
    kind: Union[str, Kind],
    regime: Union[str, Regime, None],
    offsets: Iterable[float],
    seed: int = 0,
    direction: Union[str, Direction, None] = None,
    evaluator: Optional[CocoEvaluator] = None,
    threads: Optional[int] = None,
    baseline: Optional[ApSummary] = None,
) -> SweepResult:
    """
    Evaluate `dets` once per offset and compare against the offset-0 baseline.

    Scaling kinds take no regime; pass regime=None for them (or use
    run_scaling_sweep).
    """
    kind = _as_kind(kind)
    offsets = _normalize_offsets(offsets)
    specs = [PerturbationSpec(kind, o, regime, direction, seed) for o in offsets]
    return _run(_evaluator_for(ds, evaluator, threads), dets, specs, baseline)


def run_scaling_sweep(
    ds: Dataset,
    dets: Sequence[Detection],
    kind: Union[str, Kind],
    offsets: Iterable[float],
    evaluator: Optional[CocoEvaluator] = None,
    threads: Optional[int] = None,
    baseline: Optional[ApSummary] = None,
) -> SweepResult:
    kind = _as_kind(kind)
    if kind is Kind.TRANSLATE:
        raise ValidationError("run_scaling_sweep takes enlarge or shrink")
    return run_sweep(ds, dets, kind, None, offsets, evaluator=evaluator, threads=threads, baseline=baseline)


def run_direction_matrix(
    ds: Dataset,
    dets: Sequence[Detection],
    offsets: Iterable[float],
    seed: int = 0,
    evaluator: Optional[CocoEvaluator] = None,
    threads: Optional[int] = None,
) -> Dict[Direction, SweepResult]:
    """One fixed-direction translation sweep per direction, sharing a single baseline"""
    evaluator = _evaluator_for(ds, evaluator, threads)
    offsets = _normalize_offsets(offsets)
    baseline = evaluator.evaluate(dets)
    results = {}
    for direction in DIRECTIONS:
        logger.info(f"🧭 Direction {direction.label}")
        results[direction] = run_sweep(
            ds, dets, Kind.TRANSLATE, Regime.FIXED, offsets, seed,
            direction=direction, evaluator=evaluator, baseline=baseline,
        )
    return results


def direction_matrix_frame(results: Dict[Direction, SweepResult], metric: str = "map") -> pd.DataFrame:
    """Relative drop of `metric` with one column per direction, indexed by offset"""
    columns = {d.label: [row.relative_drop[metric] for row in r.rows] for d, r in results.items()}
    offsets = next(iter(results.values())).offsets if results else []
    frame = pd.DataFrame(columns, index=pd.Index(offsets, name="offset"))
    return frame


def symmetry_gaps(results: Dict[Direction, SweepResult], metric: str = "map") -> pd.DataFrame:
    """Absolute drop differences between opposite axial directions"""
    frame = direction_matrix_frame(results, metric)
    return pd.DataFrame({
        "left_right": (frame["left"] - frame["right"]).abs(),
        "up_down": (frame["up"] - frame["down"]).abs(),
    })


def diagonal_excess(results: Dict[Direction, SweepResult], metric: str = "map") -> pd.Series:
    """min(diagonal drop) - max(axial drop) per offset; >= 0 means diagonals hurt more"""
    frame = direction_matrix_frame(results, metric)
    diagonal = [d.label for d in results if d.is_diagonal]
    axial = [d.label for d in results if not d.is_diagonal]
    return (frame[diagonal].min(axis=1) - frame[axial].max(axis=1)).rename("diagonal_excess")
