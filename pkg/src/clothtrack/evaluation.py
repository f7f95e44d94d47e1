"""Running the tracker over sequences and scoring the results."""

from __future__ import annotations

import numpy as np

from . import tracker as trk
from .config import RunConfig
from .geometry import SequenceDataset, sample_surface, interpolate_attribute
from .metrics import FrameMetrics, SequenceReport, chamfer, d_corr, d_nocs, evaluate_frames, DEFAULT_THRESHOLDS_CM
from .pipeline import TrackerModels


def make_init_pose(sequence: SequenceDataset, source: str) -> trk.InitPose:
    """Ground-truth (or to-be-perturbed) first-frame pose from synthetic data."""
    return trk.InitPose(source=source, nocs=None, mesh=sequence.canonical_mesh.copy())


def run_tracking(
    models: TrackerModels,
    config: RunConfig,
    sequence: SequenceDataset,
    init_pose: trk.InitPose | None = None,
    seed: int = 0,
) -> list[trk.StepOutput]:
    """Track frames 1..T-1 of a sequence (frame 0 supplies the init pose)."""
    if init_pose is None:
        init_pose = make_init_pose(sequence, "ground_truth")
    state = trk.init(sequence.frames[0], init_pose, config, seed=seed)
    outputs = []
    for frame in sequence.frames[1:]:
        out = trk.step(state, frame, models, config)
        outputs.append(out)
        state = out.state
    return outputs


def gt_surface_samples(sequence: SequenceDataset, n: int, seed: int = 12345):
    """Fixed ground-truth surface samples: canonical coords + per-frame pose."""
    mesh = sequence.canonical_mesh
    rng = np.random.default_rng(seed)
    nocs_pts, face_idx, bary = sample_surface(mesh.vertices, mesh.faces, n, rng)
    per_frame = [
        interpolate_attribute(f.mesh_vertices_task, mesh.faces, face_idx, bary) for f in sequence.frames
    ]
    return np.clip(nocs_pts, 0.0, 1.0), per_frame


def evaluate_tracking(
    sequence: SequenceDataset,
    outputs: list[trk.StepOutput],
    thresholds_cm=DEFAULT_THRESHOLDS_CM,
    n_surface: int = 2048,
) -> SequenceReport:
    """Score tracked frames 1..T-1 against ground truth."""
    if len(outputs) != len(sequence.frames) - 1:
        raise ValueError(f"{len(outputs)} outputs for {len(sequence.frames) - 1} tracked frames")
    gt_nocs_pts, gt_task_per_frame = gt_surface_samples(sequence, n_surface)

    frame_metrics = []
    for out, frame, gt_task in zip(outputs, sequence.frames[1:], gt_task_per_frame[1:]):
        pred = out.prediction
        m_nocs = d_nocs(pred.coords, frame.gt_nocs[pred.point_indices])
        m_chamf = chamfer(out.surface_task, gt_task)
        m_corr = d_corr(out.surface_task, out.surface_nocs, gt_task, gt_nocs_pts)
        frame_metrics.append(FrameMetrics(d_nocs=m_nocs, d_chamf=m_chamf, d_corr=m_corr))
    return evaluate_frames(frame_metrics, thresholds_cm)
