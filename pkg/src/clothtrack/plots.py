"""Figure rendering for evaluation reports.

All functions write PNG files; nothing opens a window (Agg backend).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import SequenceReport

_METRICS = ("d_nocs", "d_chamf", "d_corr")
_LABELS = {"d_nocs": "coordinate distance", "d_chamf": "chamfer (cm)", "d_corr": "correspondence (cm)"}


def metric_vs_frame(report: SequenceReport, out_path: str | Path) -> Path:
    """One curve per metric over the tracked frames."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
    xs = range(1, len(report.frames) + 1)
    for ax, m in zip(axes, _METRICS):
        ax.plot(xs, [getattr(f, m) for f in report.frames], marker=".", lw=1)
        ax.set_xlabel("frame")
        ax.set_ylabel(_LABELS[m])
        ax.grid(alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def sweep_curves(sweep: dict[str, SequenceReport], out_path: str | Path, xlabel: str = "condition") -> Path:
    """Mean-metric curves across sweep conditions (noise level, frame drop)."""
    labels = list(sweep)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
    for ax, m in zip(axes, _METRICS):
        ax.plot(labels, [getattr(sweep[k], f"mean_{m}") for k in labels], marker="o")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(f"mean {_LABELS[m]}")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def accuracy_curves(sweep: dict[str, SequenceReport], out_path: str | Path, xlabel: str = "condition") -> Path:
    """Accuracy-at-threshold curves across sweep conditions."""
    labels = list(sweep)
    thresholds = list(next(iter(sweep.values())).accuracy) if sweep else []
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for th in thresholds:
        ax.plot(labels, [sweep[k].accuracy[th] for k in labels], marker="o", label=th)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
