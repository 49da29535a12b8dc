#!/usr/bin/env python3
"""
Golden metrics for the committed COCO test fixtures

For every `<name>.annotations.json` under tests/fixtures that has a matching
`<name>.detections.json`, runs the reference COCO evaluation (pycocotools)
and writes `<name>.golden.json` with the six headline metrics.

Usage:
    python tools/generate_golden_fixtures.py [--fixtures tests/fixtures] [--only NAME]

Requires the `reference` extra: uv sync --extra reference
"""

import argparse
import contextlib
import io
import json
import sys
from pathlib import Path

from tabulate import tabulate

try:
    from pycocotools.coco import COCO
    from pycocotools.cocoeval import COCOeval
    PYCOCOTOOLS_AVAILABLE = True
except ImportError:
    PYCOCOTOOLS_AVAILABLE = False

METRIC_NAMES = ("map", "ap50", "ap75", "ap_small", "ap_medium", "ap_large")
DEFAULT_FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def reference_metrics(annotations: Path, detections: Path) -> dict:
    """Six metrics from pycocotools, with its console output swallowed"""
    with contextlib.redirect_stdout(io.StringIO()):
        gt = COCO(str(annotations))
        dt = gt.loadRes(str(detections))
        coco_eval = COCOeval(gt, dt, "bbox")
        coco_eval.evaluate()
        coco_eval.accumulate()
        coco_eval.summarize()
    return {name: float(value) for name, value in zip(METRIC_NAMES, coco_eval.stats[:6])}


def find_fixture_pairs(fixtures_dir: Path):
    for annotations in sorted(fixtures_dir.glob("*.annotations.json")):
        name = annotations.name[: -len(".annotations.json")]
        detections = fixtures_dir / f"{name}.detections.json"
        if detections.exists():
            yield name, annotations, detections


def main():
    parser = argparse.ArgumentParser(description="Generate golden metrics for test fixtures")
    parser.add_argument("--fixtures", type=Path, default=DEFAULT_FIXTURES, help="fixtures directory")
    parser.add_argument("--only", type=str, help="only this fixture name")
    args = parser.parse_args()

    if not PYCOCOTOOLS_AVAILABLE:
        print("❌ pycocotools is not installed. Install the reference extra: uv sync --extra reference")
        sys.exit(1)

    rows = []
    for name, annotations, detections in find_fixture_pairs(args.fixtures):
        if args.only and name != args.only:
            continue
        metrics = reference_metrics(annotations, detections)
        golden = args.fixtures / f"{name}.golden.json"
        with open(golden, "w") as f:
            json.dump(metrics, f, indent=2)
            f.write("\n")
        rows.append([name, *(f"{metrics[m]:.6f}" for m in METRIC_NAMES)])

    if not rows:
        print(f"❌ No fixture pairs found in {args.fixtures}")
        sys.exit(1)

    print(tabulate(rows, headers=["fixture", *METRIC_NAMES], tablefmt="fancy_grid"))
    print(f"✅ Wrote {len(rows)} golden files")


if __name__ == "__main__":
    main()
