"""Scripted garment deformation sequences.

Scripts stand in for human manipulation: folds rotate one half of the
garment about a crease line progressively to pi, crumpling applies a
smooth random displacement field, and flinging interpolates from crumpled
back to flat. All scripts are closed-form per frame and deterministic
given a seed.
"""

from __future__ import annotations

import numpy as np

from ..geometry import CanonicalMesh, PointCloudFrame, SequenceDataset
from .render import default_camera_rig, render_partial

SCRIPTS = ("fold_lr", "fold_ud", "crumple_lift", "fling_flatten")

# stacked layers are separated by this gap so z-buffer visibility stays
# well-posed (the meshes themselves have zero thickness)
LAYER_GAP = 0.002


def template_to_task(vertices_nocs: np.ndarray, garment_size: float) -> np.ndarray:
    """Place the flattened template on the table plane z = 0 (meters)."""
    out = np.zeros_like(vertices_nocs)
    out[:, 0] = (vertices_nocs[:, 0] - 0.5) * garment_size
    out[:, 1] = (vertices_nocs[:, 1] - 0.5) * garment_size
    return out


def fold_map(flat_xyz: np.ndarray, fold_mask: np.ndarray, axis: int, angle: float, gap: float = LAYER_GAP) -> np.ndarray:
    """Rotate masked vertices about the crease line (axis coordinate 0).

    At angle pi a masked vertex lands on the mirror image of its flat
    position, lifted by ``gap``.
    """
    out = flat_xyz.copy()
    d = flat_xyz[fold_mask, axis]
    out[fold_mask, axis] = d * np.cos(angle)
    out[fold_mask, 2] = flat_xyz[fold_mask, 2] + d * np.sin(angle) + gap * (1.0 - np.cos(angle)) / 2.0
    return out


def _bump_field(seed: int, garment_size: float, n_bumps: int = 6):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-0.5, 0.5, size=(n_bumps, 2)) * garment_size
    amps = rng.uniform(-1.0, 1.0, size=(n_bumps, 3)) * 0.15 * garment_size
    amps[:, 2] = np.abs(amps[:, 2])  # lift upward, never through the table
    sigmas = rng.uniform(0.15, 0.3, size=n_bumps) * garment_size

    def displacement(xyz: np.ndarray) -> np.ndarray:
        disp = np.zeros_like(xyz)
        for c, a, s in zip(centers, amps, sigmas):
            r2 = np.sum((xyz[:, :2] - c) ** 2, axis=1)
            disp += a * np.exp(-r2 / (2.0 * s * s))[:, None]
        return disp

    return displacement


def vertex_positions(
    template: CanonicalMesh,
    script: str,
    t: int,
    frames: int,
    seed: int,
    garment_size: float,
) -> np.ndarray:
    """Ground-truth task-space vertex positions of frame ``t``."""
    flat = template_to_task(template.vertices, garment_size)
    alpha = t / (frames - 1)

    if script == "fold_lr":
        mask = template.vertices[:, 0] > 0.5
        return fold_map(flat, mask, axis=0, angle=alpha * np.pi)
    if script == "fold_ud":
        mask = template.vertices[:, 1] > 0.5
        return fold_map(flat, mask, axis=1, angle=alpha * np.pi)
    if script == "crumple_lift":
        disp = _bump_field(seed, garment_size)(flat)
        return flat + alpha * disp
    if script == "fling_flatten":
        disp = _bump_field(seed, garment_size)(flat)
        return flat + (1.0 - alpha) * disp
    raise ValueError(f"unknown script {script!r}; expected one of {SCRIPTS}")


def generate_sequence(
    template: CanonicalMesh,
    script: str,
    frames: int,
    seed: int,
    category: str = "Shirt",
    garment_size: float = 0.5,
    n_cameras: int = 4,
    n_samples: int = 2048,
    raster_res: int = 96,
) -> SequenceDataset:
    """Generate one manipulation video with ground-truth labels.

    Every frame stores the partial multi-view point cloud (with canonical
    labels interpolated from the mesh) and the full posed mesh vertices.
    """
    if frames < 2:
        raise ValueError("frames must be >= 2")
    if script not in SCRIPTS:
        raise ValueError(f"unknown script {script!r}; expected one of {SCRIPTS}")

    cameras = default_camera_rig(n_cameras, center=np.zeros(3), radius=1.5 * garment_size)
    frame_list = []
    for t in range(frames):
        verts_task = vertex_positions(template, script, t, frames, seed, garment_size)
        points, gt_nocs = render_partial(
            verts_task,
            template.faces,
            template.vertices,
            cameras,
            n_samples,
            rng=np.random.default_rng((seed, t)),
            resolution=raster_res,
        )
        frame_list.append(PointCloudFrame(points=points, gt_nocs=gt_nocs, mesh_vertices_task=verts_task))

    manifest = {
        "script": script,
        "seed": int(seed),
        "camera_count": int(n_cameras),
        "frame_rate": 10,
        "garment_size": float(garment_size),
        "n_samples": int(n_samples),
    }
    return SequenceDataset(category=category, frames=frame_list, canonical_mesh=template.copy(), manifest=manifest)
