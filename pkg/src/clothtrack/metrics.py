"""Tracking quality metrics and per-sequence report aggregation.

Distances in task space are reported in centimeters; canonical-coordinate
distance is unitless. Nearest-neighbor queries use a KD-tree and must agree
exactly with brute force (tested).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

M_TO_CM = 100.0

DEFAULT_THRESHOLDS_CM = (3.0, 5.0, 10.0)


@dataclass(frozen=True)
class FrameMetrics:
    d_nocs: float
    d_chamf: float
    d_corr: float


@dataclass
class SequenceReport:
    frames: list[FrameMetrics]
    mean_d_nocs: float = 0.0
    mean_d_chamf: float = 0.0
    mean_d_corr: float = 0.0
    accuracy: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "frames": [asdict(f) for f in self.frames],
            "mean_d_nocs": self.mean_d_nocs,
            "mean_d_chamf": self.mean_d_chamf,
            "mean_d_corr": self.mean_d_corr,
            "accuracy": self.accuracy,
        }

    @staticmethod
    def from_dict(d: dict) -> "SequenceReport":
        return SequenceReport(
            frames=[FrameMetrics(**f) for f in d["frames"]],
            mean_d_nocs=d["mean_d_nocs"],
            mean_d_chamf=d["mean_d_chamf"],
            mean_d_corr=d["mean_d_corr"],
            accuracy=dict(d["accuracy"]),
        )

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @staticmethod
    def load(path: str | Path) -> "SequenceReport":
        return SequenceReport.from_dict(json.loads(Path(path).read_text()))


def _check_pair(a: np.ndarray, b: np.ndarray, aligned: bool):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != 3 or b.shape[1] != 3:
        raise ValueError("expected N x 3 arrays")
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty point set")
    if aligned and a.shape != b.shape:
        raise ValueError(f"misaligned arrays {a.shape} vs {b.shape}")
    return a, b


def d_nocs(pred_nocs: np.ndarray, gt_nocs: np.ndarray) -> float:
    """Mean per-point L2 distance between canonical coordinates (unitless)."""
    pred, gt = _check_pair(pred_nocs, gt_nocs, aligned=True)
    return float(np.linalg.norm(pred - gt, axis=1).mean())


def chamfer(pred_points: np.ndarray, gt_points: np.ndarray) -> float:
    """Symmetric Chamfer distance in cm: mean of the two directed means."""
    pred, gt = _check_pair(pred_points, gt_points, aligned=False)
    d_pg, _ = cKDTree(gt).query(pred)
    d_gp, _ = cKDTree(pred).query(gt)
    return float(0.5 * (d_pg.mean() + d_gp.mean()) * M_TO_CM)


def d_corr(
    pred_points: np.ndarray,
    pred_nocs: np.ndarray,
    gt_points: np.ndarray,
    gt_nocs: np.ndarray,
) -> float:
    """Correspondence distance in cm.

    Each predicted point is matched to the ground-truth point nearest in
    canonical space; the reported value is the mean task-space distance to
    the matches (direction is pred -> gt only).
    """
    pred_points, pred_nocs = _check_pair(pred_points, pred_nocs, aligned=True)
    gt_points, gt_nocs = _check_pair(gt_points, gt_nocs, aligned=True)
    _, idx = cKDTree(gt_nocs).query(pred_nocs)
    return float(np.linalg.norm(pred_points - gt_points[idx], axis=1).mean() * M_TO_CM)


def accuracy_at(per_frame_d_corr: list[float] | np.ndarray, threshold_cm: float) -> float:
    """Fraction of frames with d_corr strictly below the threshold."""
    values = np.asarray(per_frame_d_corr, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty metric list")
    return float(np.count_nonzero(values < threshold_cm) / values.size)


def evaluate_frames(frame_metrics: list[FrameMetrics], thresholds_cm=DEFAULT_THRESHOLDS_CM) -> SequenceReport:
    """Aggregate per-frame metrics into means and accuracy-at-threshold."""
    if not frame_metrics:
        raise ValueError("no frames to aggregate")
    d_corrs = [f.d_corr for f in frame_metrics]
    return SequenceReport(
        frames=list(frame_metrics),
        mean_d_nocs=float(np.mean([f.d_nocs for f in frame_metrics])),
        mean_d_chamf=float(np.mean([f.d_chamf for f in frame_metrics])),
        mean_d_corr=float(np.mean(d_corrs)),
        accuracy={f"A_{d:g}cm": accuracy_at(d_corrs, d) for d in thresholds_cm},
    )


# brute-force references used by tests and the acceptance suite


def chamfer_bruteforce(pred_points: np.ndarray, gt_points: np.ndarray) -> float:
    pred, gt = _check_pair(pred_points, gt_points, aligned=False)
    d2 = np.sum((pred[:, None, :] - gt[None, :, :]) ** 2, axis=2)
    return float(0.5 * (np.sqrt(d2.min(axis=1)).mean() + np.sqrt(d2.min(axis=0)).mean()) * M_TO_CM)


def d_corr_bruteforce(pred_points, pred_nocs, gt_points, gt_nocs) -> float:
    pred_points, pred_nocs = _check_pair(pred_points, pred_nocs, aligned=True)
    gt_points, gt_nocs = _check_pair(gt_points, gt_nocs, aligned=True)
    d2 = np.sum((pred_nocs[:, None, :] - gt_nocs[None, :, :]) ** 2, axis=2)
    idx = d2.argmin(axis=1)
    return float(np.linalg.norm(pred_points - gt_points[idx], axis=1).mean() * M_TO_CM)
