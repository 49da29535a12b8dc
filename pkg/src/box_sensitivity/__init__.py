"""
box-sensitivity: how COCO-style AP reacts to small bounding-box perturbations.

Modules:
    geometry   - Box, IOU, shift/enlarge/shrink perturbations
    coco_io    - COCO annotation and detection-results files
    evaluator  - COCO bbox evaluation (mAP, AP50, AP75, APs/m/l)
    sweep      - metric drop across perturbation offsets
    synthetic  - IOU decay on random boxes
    report     - CSV tables and SVG charts
    cli        - command line
"""

from .coco_io import Dataset, Detection, GroundTruth, gt_as_detections, load_dataset, load_detections
from .evaluator import ApSummary, CocoEvaluator, EvalParams, evaluate
from .exceptions import BoxSensitivityError, ContractViolation, ParseError, UsageError, ValidationError
from .geometry import Box, Direction, iou
from .sweep import PerturbationSpec, SweepResult, run_direction_matrix, run_scaling_sweep, run_sweep

__version__ = "0.1.0"

__all__ = [
    "ApSummary",
    "Box",
    "BoxSensitivityError",
    "CocoEvaluator",
    "ContractViolation",
    "Dataset",
    "Detection",
    "Direction",
    "EvalParams",
    "GroundTruth",
    "ParseError",
    "PerturbationSpec",
    "SweepResult",
    "UsageError",
    "ValidationError",
    "evaluate",
    "gt_as_detections",
    "iou",
    "load_dataset",
    "load_detections",
    "run_direction_matrix",
    "run_scaling_sweep",
    "run_sweep",
]
