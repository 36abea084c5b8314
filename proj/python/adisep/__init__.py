"""Adaptive depth interval separation, pseudo-LiDAR and KITTI AP@40 evaluation."""

import json

from ._core import (
    EvaluationError,
    ParseError,
    backproject,
    backproject_stack,
    compute_uncertainty,
    fuse_features,
    interval_of,
    iou_3d,
    iou_bev,
    parse_calib,
    parse_label_file,
    project,
    read_depth_png,
    read_ply,
    reconstruct,
    separate,
    soft_interval_weights,
    soft_separate,
    uniform_bounds,
    write_depth_png,
    write_ply,
)
from ._core import evaluate as _evaluate


def evaluate(ground_truth, detections, threads=1):
    """AP@40 report (dict) from per-frame label and result file contents."""
    return json.loads(_evaluate(list(ground_truth), list(detections), threads))


__all__ = [
    "EvaluationError",
    "ParseError",
    "backproject",
    "backproject_stack",
    "compute_uncertainty",
    "evaluate",
    "fuse_features",
    "interval_of",
    "iou_3d",
    "iou_bev",
    "parse_calib",
    "parse_label_file",
    "project",
    "read_depth_png",
    "read_ply",
    "reconstruct",
    "separate",
    "soft_interval_weights",
    "soft_separate",
    "uniform_bounds",
    "write_depth_png",
    "write_ply",
]
