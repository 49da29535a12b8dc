#!/usr/bin/env python3
"""
box-sensitivity command line

Subcommands:
    evaluate   - COCO bbox metrics for a detections file (or GT as predictions)
    sweep      - metric drop under box translation or scaling, written as CSV + SVG
    iou-study  - IOU decay of random boxes under proportional and fixed shifts

Progress goes to stderr; stdout carries only results (summaries, written paths).

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal invariant violation.
"""

import argparse
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import pandas as pd
from tabulate import tabulate

from .coco_io import gt_as_detections, load_dataset, load_detections
from .evaluator import CocoEvaluator, format_summary
from .exceptions import ContractViolation, ParseError, UsageError, ValidationError
from .geometry import DIRECTIONS, Direction
from .helpers.config_loader import get_run_defaults, load_config
from .report import (
    SIZE_METRICS,
    decay_chart,
    direction_chart,
    sweep_chart,
    write_csv,
    write_summary_table,
    write_svg_chart,
)
from .sweep import SweepResult, direction_matrix_frame, run_direction_matrix, run_sweep
from .synthetic import RandomBoxConfig, generate_boxes, iou_decay_fixed, iou_decay_proportional

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_CONTRACT = 3

KINDS = ("translate", "enlarge", "shrink")
REGIMES = ("random", "fixed")
DIRECTION_CHOICES = tuple(d.label for d in DIRECTIONS) + ("all",)
FORMATS = ("plain", "table", "json", "csv")


def setup_logging(level: int = logging.INFO):
    """Configure logging to stderr so stdout stays machine-readable"""
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Resolved settings for one subcommand run"""
    command: str
    annotations: Optional[Path] = None
    detections: Optional[Path] = None
    gt_as_predictions: bool = False
    kind: str = "translate"
    regime: Optional[str] = None
    direction: Optional[str] = None
    offsets: Optional[List[float]] = None
    proportional_offsets: Optional[List[float]] = None
    seed: int = 0
    out: Optional[Path] = None
    threads: int = 1
    format: str = "plain"
    size_chart: bool = False
    count: int = 1000
    min_size: float = 4.0
    max_size: float = 256.0


def parse_offsets(text: str) -> List[float]:
    """
    Parse an offset spec: 'A..B' (step 1), 'A..B:S' or a comma list '0,1,2.5'.

    Returns sorted, de-duplicated, non-negative offsets.
    """
    text = text.strip()
    try:
        if ".." in text:
            bounds, _, step_text = text.partition(":")
            lo_text, hi_text = bounds.split("..")
            lo, hi = float(lo_text), float(hi_text)
            step = float(step_text) if step_text else 1.0
            if step <= 0:
                raise UsageError(f"Offset step must be positive: '{text}'")
            if hi < lo:
                raise UsageError(f"Offset range end is below its start: '{text}'")
            n = int(math.floor((hi - lo) / step + 1e-9))
            values = [round(lo + i * step, 10) for i in range(n + 1)]
        else:
            values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"Invalid offset spec '{text}' (use A..B, A..B:STEP or a comma list)")

    if not values:
        raise UsageError(f"Offset spec '{text}' is empty")
    if any(v < 0 or not math.isfinite(v) for v in values):
        raise UsageError(f"Offsets must be non-negative: '{text}'")
    return sorted(set(values))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="box-sensitivity", description="Bounding-box sensitivity of COCO AP metrics")
    parser.add_argument("--config", type=Path, help="config.env file with run defaults")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_inputs(p):
        p.add_argument("--annotations", type=Path, required=True, help="COCO instances annotation file")
        p.add_argument("--detections", type=Path, help="COCO detection-results file")
        p.add_argument("--gt-as-predictions", action="store_true", help="use ground truth as score-1 detections")
        p.add_argument("--threads", type=int, help="matching worker threads")
        p.add_argument("--out", type=Path, help="output directory")

    p_eval = sub.add_parser("evaluate", help="compute the six COCO bbox metrics")
    add_inputs(p_eval)
    p_eval.add_argument("--format", choices=FORMATS, default="plain", help="stdout format")

    p_sweep = sub.add_parser("sweep", help="evaluate under increasing box perturbation")
    add_inputs(p_sweep)
    p_sweep.add_argument("--kind", choices=KINDS, default="translate")
    p_sweep.add_argument("--regime", choices=REGIMES, help="translation regime (default random)")
    p_sweep.add_argument("--direction", choices=DIRECTION_CHOICES, help="fixed-regime direction, or 'all'")
    p_sweep.add_argument("--offsets", help="pixel offsets: A..B, A..B:STEP or comma list")
    p_sweep.add_argument("--seed", type=int, help="seed for random directions")
    p_sweep.add_argument("--size-chart", action="store_true", help="also chart APsmall/medium/large")

    p_study = sub.add_parser("iou-study", help="IOU decay of random boxes")
    p_study.add_argument("--count", type=int, help="number of random boxes")
    p_study.add_argument("--min-size", type=float, help="smallest box width/height (px)")
    p_study.add_argument("--max-size", type=float, help="largest box width/height (px)")
    p_study.add_argument("--seed", type=int, help="seed for box generation")
    p_study.add_argument("--offsets", help="fixed-shift pixel offsets")
    p_study.add_argument("--proportional-offsets", help="proportional-shift fractions")
    p_study.add_argument("--out", type=Path, help="output directory")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags over config.env values over built-in defaults and check combinations"""
    defaults = get_run_defaults(load_config(args.config))

    def pick(name, fallback):
        value = getattr(args, name, None)
        return fallback if value is None else value

    cfg = RunConfig(
        command=args.command,
        annotations=getattr(args, "annotations", None),
        detections=getattr(args, "detections", None),
        gt_as_predictions=getattr(args, "gt_as_predictions", False),
        kind=getattr(args, "kind", "translate"),
        regime=getattr(args, "regime", None),
        direction=getattr(args, "direction", None),
        offsets=parse_offsets(pick("offsets", defaults.sweep_offsets)),
        proportional_offsets=parse_offsets(pick("proportional_offsets", defaults.proportional_offsets)),
        seed=pick("seed", defaults.seed),
        # evaluate writes files only when --out is given
        out=args.out if args.command == "evaluate" else pick("out", defaults.output_dir),
        threads=pick("threads", defaults.threads),
        format=getattr(args, "format", "plain"),
        size_chart=getattr(args, "size_chart", False),
        count=pick("count", defaults.synthetic_count),
        min_size=pick("min_size", defaults.synthetic_size_range[0]),
        max_size=pick("max_size", defaults.synthetic_size_range[1]),
    )

    if cfg.threads < 1:
        raise UsageError(f"--threads must be at least 1, got {cfg.threads}")
    if cfg.command in ("evaluate", "sweep"):
        if cfg.detections is None and not cfg.gt_as_predictions:
            raise UsageError("Pass --detections PATH or --gt-as-predictions")
        if cfg.detections is not None and cfg.gt_as_predictions:
            raise UsageError("--detections and --gt-as-predictions cannot be used together")
    if cfg.command == "sweep":
        if cfg.kind == "translate":
            cfg.regime = cfg.regime or "random"
            if cfg.regime == "fixed" and cfg.direction is None:
                raise UsageError("--regime fixed needs --direction")
            if cfg.regime == "random" and cfg.direction is not None:
                raise UsageError("--direction only applies to --regime fixed")
        elif cfg.regime is not None or cfg.direction is not None:
            raise UsageError(f"--kind {cfg.kind} takes no --regime or --direction")
    return cfg


def _load_inputs(cfg: RunConfig):
    ds = load_dataset(cfg.annotations)
    if cfg.gt_as_predictions:
        dets = gt_as_detections(ds)
        logger.info(f"📊 Using {len(dets)} ground-truth boxes as predictions")
    else:
        dets = load_detections(cfg.detections, ds)
    return ds, dets


def cmd_evaluate(cfg: RunConfig) -> int:
    ds, dets = _load_inputs(cfg)
    start = time.time()
    summary = CocoEvaluator(ds, threads=cfg.threads).evaluate(dets)
    logger.info(f"✅ Evaluation done in {time.time() - start:.2f}s")
    print(format_summary(summary, cfg.format))

    if cfg.out is not None:
        frame = pd.DataFrame(list(summary.as_dict().items()), columns=["metric", "value"])
        print(write_summary_table(frame, cfg.out / "summary.csv", index=False))
    return EXIT_OK


def _print_drop_table(result: SweepResult, title: str):
    print(f"\n📉 {title}", file=sys.stderr)
    print(
        tabulate(result.drop_table(), headers=result.drop_table_headers(), tablefmt="fancy_grid"),
        file=sys.stderr,
    )


def _sweep_stem(kind: str, regime: Optional[str], direction: Optional[str]) -> str:
    return "_".join(["sweep", kind, *(p.replace("-", "_") for p in (regime, direction) if p)])


def _write_sweep(result: SweepResult, out: Path, stem: str, size_chart: bool) -> List[Path]:
    paths = [write_csv(result, out / f"{stem}.csv")]
    charts = [(lambda: sweep_chart(result), out / f"{stem}.svg")]
    if size_chart:
        title = f"{stem.replace('_', ' ')} by object size"
        charts.append((lambda: sweep_chart(result, SIZE_METRICS, title=title), out / f"{stem}_sizes.svg"))
    for build, path in charts:
        try:
            chart = build()
        except ValidationError as e:
            logger.warning(f"⚠️ Skipping {path.name}: {e}")
            continue
        paths.append(write_svg_chart(chart, path))
    return paths


def cmd_sweep(cfg: RunConfig) -> int:
    ds, dets = _load_inputs(cfg)
    evaluator = CocoEvaluator(ds, threads=cfg.threads)
    logger.info(f"🚀 Sweep {cfg.kind} over offsets {cfg.offsets} ({evaluator.threads} threads)")
    paths = []

    if cfg.direction == "all":
        results = run_direction_matrix(ds, dets, cfg.offsets, cfg.seed, evaluator=evaluator)
        for direction, result in results.items():
            stem = _sweep_stem(cfg.kind, cfg.regime, direction.label)
            paths += _write_sweep(result, cfg.out, stem, cfg.size_chart)
            _print_drop_table(result, f"translate fixed {direction.label}")
        paths.append(write_summary_table(direction_matrix_frame(results), cfg.out / "direction_matrix.csv"))
        paths.append(write_svg_chart(direction_chart(results), cfg.out / "direction_matrix.svg"))
    else:
        direction = Direction.from_name(cfg.direction) if cfg.direction else None
        result = run_sweep(ds, dets, cfg.kind, cfg.regime, cfg.offsets, cfg.seed, direction, evaluator=evaluator)
        stem = _sweep_stem(cfg.kind, cfg.regime, cfg.direction)
        paths += _write_sweep(result, cfg.out, stem, cfg.size_chart)
        _print_drop_table(result, stem.replace("_", " "))

    for path in paths:
        print(path)
    return EXIT_OK


def cmd_iou_study(cfg: RunConfig) -> int:
    box_cfg = RandomBoxConfig(
        count=cfg.count,
        width_range=(cfg.min_size, cfg.max_size),
        height_range=(cfg.min_size, cfg.max_size),
        seed=cfg.seed,
    )
    boxes = generate_boxes(box_cfg)
    logger.info(f"🚀 IOU study on {len(boxes)} boxes (seed {cfg.seed})")

    paths = []
    for name, table in (
        ("proportional", iou_decay_proportional(boxes, cfg.proportional_offsets)),
        ("fixed", iou_decay_fixed(boxes, cfg.offsets)),
    ):
        paths.append(write_csv(table, cfg.out / f"iou_decay_{name}.csv"))
        paths.append(write_svg_chart(decay_chart(table), cfg.out / f"iou_decay_{name}.svg"))
        print(f"\n📉 IOU decay, {table.mode} shift", file=sys.stderr)
        print(tabulate(table.summary(), headers="keys", tablefmt="fancy_grid", showindex=False, floatfmt=".4f"),
              file=sys.stderr)

    for path in paths:
        print(path)
    return EXIT_OK


COMMANDS = {
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "iou-study": cmd_iou_study,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run the command line; returns the process exit code"""
    setup_logging()
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        elif args.quiet:
            logging.getLogger().setLevel(logging.WARNING)
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except UsageError as e:
        logger.error(f"❌ Usage error: {e}")
        return EXIT_USAGE
    except (ParseError, ValidationError, OSError) as e:
        logger.error(f"❌ Input error: {e}")
        return EXIT_INPUT
    except ContractViolation as e:
        logger.error(f"❌ Internal invariant violated: {e}")
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
