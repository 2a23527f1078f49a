"""Pose/force metrics, LOUO and ablation runs, report emission."""

from .harness import (
    AblationSpec,
    LeakageError,
    LouoResult,
    check_no_leakage,
    evaluate,
    mean_row,
    predict,
    run_ablation,
    run_ablations,
    run_louo,
)
from .metrics import (
    ForceMetrics,
    MetricsError,
    MetricsReport,
    angle_diff,
    force_metrics,
    mean_pose_baseline,
    metrics_report,
    mpjpe,
    pearson,
)
from .report import ABLATION_COLUMNS, REPORT_COLUMNS, emit_report

__all__ = [
    "ABLATION_COLUMNS",
    "AblationSpec",
    "ForceMetrics",
    "LeakageError",
    "LouoResult",
    "MetricsError",
    "MetricsReport",
    "REPORT_COLUMNS",
    "angle_diff",
    "check_no_leakage",
    "emit_report",
    "evaluate",
    "force_metrics",
    "mean_pose_baseline",
    "mean_row",
    "metrics_report",
    "mpjpe",
    "pearson",
    "predict",
    "run_ablation",
    "run_ablations",
    "run_louo",
]
