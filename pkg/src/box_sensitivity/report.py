"""
CSV tables and standalone SVG line charts for sweep and decay results.

Charts are plain SVG 1.1 text with no external resources; tick positions
come from matplotlib's MaxNLocator so axes get round numbers.
"""

import logging
import math
from dataclasses import dataclass
from html import escape
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from matplotlib.ticker import MaxNLocator

from .evaluator import METRIC_LABELS, METRIC_NAMES
from .exceptions import ValidationError
from .geometry import Direction
from .synthetic import DecayTable
from .sweep import SweepResult

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

WIDTH, HEIGHT, MARGIN = 800, 500, 60
PALETTE = ("#4C78A8", "#F58518", "#54A24B", "#E45756", "#72B7B2", "#B279A2", "#FF9DA6", "#9D755D")
FLOAT_FORMAT = "%.6f"

SWEEP_CSV_COLUMNS = ["offset", "regime", "direction", *METRIC_NAMES, *(f"drop_{m}" for m in METRIC_NAMES)]
SIZE_METRICS = ("ap_small", "ap_medium", "ap_large")

Point = Tuple[float, float]


@dataclass
class ChartSpec:
    title: str
    x_label: str
    y_label: str
    series: Dict[str, Sequence[Point]]

    def __post_init__(self):
        if not self.series:
            raise ValidationError(f"Chart '{self.title}' has no series")
        for name, points in self.series.items():
            if not points:
                raise ValidationError(f"Series '{name}' is empty", [name])
            xs = [x for x, _ in points]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValidationError(f"Series '{name}' x values are not strictly increasing", [name])


def _write_frame(frame: pd.DataFrame, path: PathLike, index: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    logger.info(f"✅ Wrote {path}")
    return path


def write_csv(result: Union[SweepResult, DecayTable], path: PathLike) -> Path:
    """One row per offset; sweeps carry metrics and drops, decay tables carry IOU statistics"""
    if isinstance(result, SweepResult):
        frame = result.to_frame()[SWEEP_CSV_COLUMNS]
    elif isinstance(result, DecayTable):
        frame = result.summary()
    else:
        raise TypeError(f"Cannot write {type(result).__name__} as CSV")
    return _write_frame(frame, path)


def write_summary_table(frame: pd.DataFrame, path: PathLike, index: bool = True) -> Path:
    return _write_frame(frame, path, index=index)


def _ticks(lo: float, hi: float, nbins: int) -> np.ndarray:
    if hi - lo < 1e-9:
        lo, hi = lo - 1.0, hi + 1.0
    return MaxNLocator(nbins=nbins).tick_values(lo, hi)


def render_svg(spec: ChartSpec) -> str:
    xs = [x for points in spec.series.values() for x, _ in points]
    ys = [y for points in spec.series.values() for _, y in points]
    x_ticks = _ticks(min(xs), max(xs), 10)
    y_ticks = _ticks(min(ys), max(ys), 8)
    x_lo, x_hi = float(x_ticks[0]), float(x_ticks[-1])
    y_lo, y_hi = float(y_ticks[0]), float(y_ticks[-1])
    w = WIDTH - 2 * MARGIN
    h = HEIGHT - 2 * MARGIN

    def to_svg_x(val: float) -> float:
        return MARGIN + (val - x_lo) / (x_hi - x_lo) * w

    def to_svg_y(val: float) -> float:
        return MARGIN + h - (val - y_lo) / (y_hi - y_lo) * h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'  <rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'  <text x="{WIDTH / 2}" y="{MARGIN / 2}" font-size="16" font-weight="600" '
        f'text-anchor="middle" fill="#333">{escape(spec.title)}</text>',
    ]

    for t in x_ticks:
        px = to_svg_x(float(t))
        parts.append(f'  <line x1="{px:.2f}" y1="{MARGIN}" x2="{px:.2f}" y2="{MARGIN + h}" stroke="#eee" stroke-width="1"/>')
        parts.append(
            f'  <text x="{px:.2f}" y="{MARGIN + h + 16}" font-size="11" fill="#555" '
            f'text-anchor="middle">{escape(f"{float(t):g}")}</text>'
        )
    for t in y_ticks:
        py = to_svg_y(float(t))
        parts.append(f'  <line x1="{MARGIN}" y1="{py:.2f}" x2="{MARGIN + w}" y2="{py:.2f}" stroke="#eee" stroke-width="1"/>')
        parts.append(
            f'  <text x="{MARGIN - 6}" y="{py + 4:.2f}" font-size="11" fill="#555" '
            f'text-anchor="end">{escape(f"{float(t):g}")}</text>'
        )

    parts += [
        f'  <line x1="{MARGIN}" y1="{MARGIN + h}" x2="{MARGIN + w}" y2="{MARGIN + h}" stroke="#444" stroke-width="1"/>',
        f'  <line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{MARGIN + h}" stroke="#444" stroke-width="1"/>',
        f'  <text x="{MARGIN + w / 2}" y="{HEIGHT - 16}" font-size="12" fill="#555" '
        f'text-anchor="middle">{escape(spec.x_label)}</text>',
        f'  <text x="16" y="{MARGIN + h / 2}" font-size="12" fill="#555" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN + h / 2})">{escape(spec.y_label)}</text>',
    ]

    for i, (name, points) in enumerate(spec.series.items()):
        color = PALETTE[i % len(PALETTE)]
        poly = " ".join(f"{to_svg_x(x):.2f},{to_svg_y(y):.2f}" for x, y in points)
        parts.append(f'  <polyline fill="none" stroke="{color}" stroke-width="2" points="{poly}"/>')
        ly = MARGIN + 14 + 18 * i
        lx = MARGIN + w - 150
        parts.append(f'  <line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        parts.append(f'  <text x="{lx + 26}" y="{ly + 4}" font-size="11" fill="#333">{escape(name)}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg_chart(spec: ChartSpec, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write(render_svg(spec))
    logger.info(f"✅ Wrote {path}")
    return path


def _finite(points: Sequence[Point]) -> List[Point]:
    return [(x, y) for x, y in points if not math.isnan(y)]


def sweep_chart(
    result: SweepResult,
    metrics: Sequence[str] = ("map", "ap50", "ap75"),
    title: Optional[str] = None,
) -> ChartSpec:
    """
    AP against offset, one series per metric.

    Undefined values (-1, no ground truth in scope) are left out; a metric
    with no defined value gets no series.

    Raises:
        ValidationError: if no metric has a defined value
    """
    first = result.rows[0].spec if result.rows else None
    if title is None and first is not None:
        title = " ".join(filter(None, [first.kind.value, first.regime_label, first.direction_label]))
    series = {}
    for m in metrics:
        points = [(row.spec.offset, getattr(row.summary, m)) for row in result.rows]
        points = [(x, y) for x, y in _finite(points) if y >= 0]
        if points:
            series[METRIC_LABELS[m]] = points
    return ChartSpec(title or "sweep", "offset (px)", "AP", series)


def direction_chart(results: Dict[Direction, SweepResult], metric: str = "map") -> ChartSpec:
    series = {}
    for direction, result in results.items():
        points = _finite([(row.spec.offset, row.relative_drop[metric]) for row in result.rows])
        if points:
            series[direction.label] = points
    return ChartSpec(f"{METRIC_LABELS[metric]} drop by shift direction", "offset (px)", "relative drop (%)", series)


def decay_chart(table: DecayTable, limit: int = 5) -> ChartSpec:
    x_label = "offset (fraction of box size)" if table.mode == "proportional" else "offset (px)"
    return ChartSpec(f"IOU decay, {table.mode} shift", x_label, "IOU", table.per_box_series(limit))
