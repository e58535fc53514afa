"""Evaluation metrics: rotation accuracy at angular thresholds, median error,
and pooled per-point PCK for correspondences.

Conventions (each follows the dominant benchmark usage): accuracy counts
errors strictly below the threshold; PCK counts distances less than or equal
to alpha * max(bbox side); per-point PCK pools correct/total over the whole
evaluation set rather than averaging per image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError, ValidationError


@dataclass
class PoseEvalReport:
    acc_pi_6: float
    acc_pi_18: float
    median_error: float
    errors: np.ndarray

    def __post_init__(self):
        if self.acc_pi_18 > self.acc_pi_6 + 1e-12:
            raise ValidationError("threshold nesting violated: acc@pi/18 > acc@pi/6")


@dataclass
class PckReport:
    per_point_pck: float  # percentage in [0, 100]
    alpha: float
    correct: int
    total: int

    def __post_init__(self):
        if self.correct > self.total:
            raise ValidationError("correct count exceeds total")


def _check_errors(errors) -> np.ndarray:
    e = np.asarray(errors, dtype=np.float64)
    if e.size == 0:
        raise DataError("empty error list")
    if (e < 0).any() or (e > math.pi + 1e-12).any():
        raise ValidationError("rotation errors must lie in [0, pi]")
    return e


def pose_accuracy(errors, threshold: float) -> float:
    """Fraction of errors strictly below the threshold."""
    e = _check_errors(errors)
    return float((e < threshold).mean())


def median_error(errors) -> float:
    """Lower median: element (n-1)//2 of the sorted list."""
    e = np.sort(_check_errors(errors))
    return float(e[(len(e) - 1) // 2])


def pose_eval(errors) -> PoseEvalReport:
    e = _check_errors(errors)
    return PoseEvalReport(
        acc_pi_6=pose_accuracy(e, math.pi / 6),
        acc_pi_18=pose_accuracy(e, math.pi / 18),
        median_error=median_error(e),
        errors=e,
    )


def pck(pred, gt, bbox: tuple[float, float], alpha: float = 0.1) -> PckReport:
    """Per-point PCK: keypoint k is correct iff ||pred_k - gt_k||_2 <=
    alpha * max(bbox). pred/gt are aligned (K, 2) arrays."""
    p = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    g = np.asarray(gt, dtype=np.float64).reshape(-1, 2)
    if len(p) != len(g):
        raise ValidationError(f"{len(p)} predictions vs {len(g)} ground-truth points")
    h, w = bbox
    if h <= 0 or w <= 0:
        raise ValidationError(f"bbox must be positive, got {bbox}")
    thr = alpha * max(h, w)
    correct = int((np.linalg.norm(p - g, axis=1) <= thr).sum())
    return pck_from_counts(correct, len(p), alpha)


def pck_from_counts(correct: int, total: int, alpha: float) -> PckReport:
    """Pool already-counted keypoints (use to aggregate across a dataset)."""
    if total <= 0:
        raise DataError("no keypoints to evaluate")
    return PckReport(100.0 * correct / total, alpha, correct, total)


# ---------------------------------------------------------------------------
# Report serialization: machine lines 'metric value' and a human table
# ---------------------------------------------------------------------------


def pose_report_lines(r: PoseEvalReport) -> list[str]:
    return [
        f"acc_pi_6 {r.acc_pi_6!r}",
        f"acc_pi_18 {r.acc_pi_18!r}",
        f"median_error {r.median_error!r}",
        f"n {len(r.errors)}",
    ]


def pck_report_lines(r: PckReport) -> list[str]:
    return [
        f"per_point_pck {r.per_point_pck!r}",
        f"alpha {r.alpha!r}",
        f"correct {r.correct}",
        f"total {r.total}",
    ]


def parse_report_lines(lines) -> dict[str, float]:
    out = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"report line {lineno}: expected 'metric value'")
        out[parts[0]] = float(parts[1])
    return out


def pose_report_table(r: PoseEvalReport) -> str:
    # display rounding is round-half-even via python format
    return "\n".join([
        f"{'metric':<14}{'value':>10}",
        f"{'Acc@pi/6':<14}{100 * r.acc_pi_6:>9.1f}%",
        f"{'Acc@pi/18':<14}{100 * r.acc_pi_18:>9.1f}%",
        f"{'median (deg)':<14}{math.degrees(r.median_error):>10.2f}",
        f"{'samples':<14}{len(r.errors):>10d}",
    ])


def pck_report_table(r: PckReport) -> str:
    return "\n".join([
        f"{'metric':<18}{'value':>10}",
        f"{'per-point PCK@' + format(r.alpha, 'g'):<18}{r.per_point_pck:>10.1f}",
        f"{'correct/total':<18}{f'{r.correct}/{r.total}':>10}",
    ])
