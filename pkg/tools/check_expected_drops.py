#!/usr/bin/env python3
"""
Published relative-drop check on COCO val2017

Runs the ground-truth-as-predictions sweeps (random translation at 1 and 2 px,
1 px enlarge/shrink, the eight-direction matrix) and compares relative drops
with the published numbers and tolerances. With --detections it also checks a
model's results file against the published model numbers and the ordering
properties any detector should show.

Usage:
    python tools/check_expected_drops.py --annotations instances_val2017.json
    python tools/check_expected_drops.py --annotations instances_val2017.json \\
        --detections maskrcnn_val2017_results.json --threads 8

Exit code 0 when every row passes, 1 otherwise.
"""

import argparse
import logging
import math
import sys
from dataclasses import dataclass
from typing import List, Optional

from tabulate import tabulate

from box_sensitivity.cli import setup_logging
from box_sensitivity.coco_io import gt_as_detections, load_dataset, load_detections
from box_sensitivity.evaluator import CocoEvaluator
from box_sensitivity.sweep import (
    diagonal_excess,
    run_direction_matrix,
    run_scaling_sweep,
    run_sweep,
    symmetry_gaps,
)

logger = logging.getLogger(__name__)

# (metric, offset, expected drop %, tolerance pp)
GT_TRANSLATION = [
    ("map", 1, 23.8, 2.0), ("map", 2, 41.6, 2.0),
    ("ap50", 1, 3.8, 1.5), ("ap50", 2, 13.1, 1.5),
    ("ap75", 1, 18.7, 2.0), ("ap75", 2, 30.6, 2.0),
    ("ap_large", 1, 1.7, 3.0), ("ap_medium", 1, 13.4, 3.0), ("ap_small", 1, 41.7, 3.0),
]
GT_SCALING = [("map", 10.0, 3.0), ("ap_small", 20.0, 5.0)]

MODEL_TRANSLATION = [
    ("map", 1, 8.4, 2.0), ("map", 2, 20.1, 2.0),
    ("ap50", 1, 1.5, 1.5), ("ap50", 2, 7.1, 1.5),
    ("ap75", 1, 9.6, 2.0), ("ap75", 2, 25.4, 2.0),
    ("ap_large", 1, 1.38, 3.0), ("ap_medium", 1, 5.85, 3.0), ("ap_small", 1, 23.1, 3.0),
]
MODEL_SCALING = [("map", 4.0, 3.0), ("ap_small", 8.0, 5.0)]

SYMMETRY_TOLERANCE = 1.5
BASELINE_MIN_MAP = 0.99


@dataclass
class Check:
    name: str
    expected: str
    got: str
    passed: bool


def checkmark(val):
    """Return checkmark or X based on boolean value"""
    return '✅' if val else '❌'


def drop_at(result, metric: str, offset: float) -> float:
    for row in result.rows:
        if row.spec.offset == offset:
            return row.relative_drop[metric]
    raise KeyError(f"offset {offset} not in sweep")


def within(label: str, got: float, expected: float, tolerance: float) -> Check:
    passed = not math.isnan(got) and abs(got - expected) <= tolerance
    return Check(label, f"{expected:g}% ± {tolerance:g}", f"{got:.2f}%", passed)


def translation_checks(prefix: str, result, table) -> List[Check]:
    return [
        within(f"{prefix} translate {metric} @{offset}px", drop_at(result, metric, offset), expected, tol)
        for metric, offset, expected, tol in table
    ]


def scaling_checks(prefix: str, results: dict, table) -> List[Check]:
    checks = []
    for kind, result in results.items():
        for metric, expected, tol in table:
            checks.append(within(f"{prefix} {kind} {metric} @1px", drop_at(result, metric, 1.0), expected, tol))
    return checks


def ordering_checks(prefix: str, result) -> List[Check]:
    """small >= medium >= large at every offset >= 1; AP50 <= mAP <= AP75 at 1px"""
    checks = []
    for row in result.rows:
        if row.spec.offset < 1:
            continue
        d = row.relative_drop
        ok = d["ap_small"] >= d["ap_medium"] >= d["ap_large"]
        checks.append(Check(
            f"{prefix} size ordering @{row.spec.offset:g}px", "small ≥ medium ≥ large",
            f"{d['ap_small']:.2f} / {d['ap_medium']:.2f} / {d['ap_large']:.2f}", ok,
        ))
    d = next(row.relative_drop for row in result.rows if row.spec.offset == 1.0)
    checks.append(Check(
        f"{prefix} threshold ordering @1px", "AP50 ≤ mAP ≤ AP75",
        f"{d['ap50']:.2f} / {d['map']:.2f} / {d['ap75']:.2f}", d["ap50"] <= d["map"] <= d["ap75"],
    ))
    return checks


def direction_checks(results) -> List[Check]:
    checks = []
    excess = diagonal_excess(results)
    gaps = symmetry_gaps(results)
    for offset in excess.index:
        if offset < 1:
            continue
        checks.append(Check(f"diagonal ≥ axial @{offset:g}px", "≥ 0", f"{excess[offset]:.2f}", excess[offset] >= 0))
        worst = max(gaps.loc[offset, "left_right"], gaps.loc[offset, "up_down"])
        checks.append(Check(
            f"left/right, up/down symmetry @{offset:g}px", f"≤ {SYMMETRY_TOLERANCE:g}pp",
            f"{worst:.2f}pp", worst <= SYMMETRY_TOLERANCE,
        ))
    return checks


def run_block(prefix: str, ds, dets, evaluator, seed: int, translation, scaling, baseline_min: Optional[float]):
    checks = []
    translate = run_sweep(ds, dets, "translate", "random", [0, 1, 2], seed, evaluator=evaluator)
    if baseline_min is not None:
        checks.append(Check(
            f"{prefix} baseline mAP", f"≥ {baseline_min:g}",
            f"{translate.baseline.map:.4f}", translate.baseline.map >= baseline_min,
        ))
    checks += translation_checks(prefix, translate, translation)
    checks += ordering_checks(prefix, translate)

    scaled = {
        kind: run_scaling_sweep(ds, dets, kind, [0, 1], evaluator=evaluator, baseline=translate.baseline)
        for kind in ("enlarge", "shrink")
    }
    checks += scaling_checks(prefix, scaled, scaling)
    return checks


def main():
    parser = argparse.ArgumentParser(description="Check relative AP drops against published numbers")
    parser.add_argument("--annotations", required=True, help="COCO val2017 instances annotation file")
    parser.add_argument("--detections", help="optional model detections (COCO results file)")
    parser.add_argument("--threads", type=int, default=None, help="matching worker threads")
    parser.add_argument("--seed", type=int, default=0, help="seed for random directions")
    parser.add_argument("--skip-directions", action="store_true", help="skip the eight-direction matrix")
    args = parser.parse_args()

    setup_logging()
    print("🔍 Expected-drop check")
    print("=" * 60)

    ds = load_dataset(args.annotations)
    evaluator = CocoEvaluator(ds, threads=args.threads)
    gt_dets = gt_as_detections(ds)

    checks = run_block("GT", ds, gt_dets, evaluator, args.seed, GT_TRANSLATION, GT_SCALING, BASELINE_MIN_MAP)
    if not args.skip_directions:
        checks += direction_checks(run_direction_matrix(ds, gt_dets, [0, 1, 2, 3], args.seed, evaluator=evaluator))
    if args.detections:
        model_dets = load_detections(args.detections, ds)
        checks += run_block("model", ds, model_dets, evaluator, args.seed, MODEL_TRANSLATION, MODEL_SCALING, None)

    table = [[c.name, c.expected, c.got, checkmark(c.passed)] for c in checks]
    print(tabulate(table, headers=["Check", "Expected", "Got", "OK"], tablefmt="fancy_grid"))

    failed = [c for c in checks if not c.passed]
    print()
    print(f"📊 {len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        print(f"❌ {len(failed)} checks outside tolerance")
        sys.exit(1)
    print("🎉 All checks within tolerance")


if __name__ == "__main__":
    main()
