"""Online tracking loop.

Initialize from a first-frame pose, then per frame: encode both clouds,
fuse them, predict and refine canonical coordinates, scatter into the
feature volume and warp the canonical mesh into task space. The refined
prediction of each frame becomes the previous-frame input of the next.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import nocs as nocs_ops
from .config import RunConfig
from .geometry import CanonicalMesh, PointCloudFrame, SequenceDataset, sample_surface, interpolate_attribute
from .pipeline import TrackerModels
from .models.refiner import apply_mesh_refinement
from .models.warpfield import scatter_max_volume


class AlignmentError(ValueError):
    """First-frame pose does not line up with the configured resampling."""


@dataclass
class InitPose:
    source: str  # ground_truth | perturbed | external_file
    nocs: np.ndarray | None  # N x 3, aligned with the (resampled) first frame
    mesh: CanonicalMesh
    points: np.ndarray | None = None  # external_file only


@dataclass
class TrackerState:
    prev_points: np.ndarray
    prev_nocs: np.ndarray
    canonical_mesh: CanonicalMesh
    frame_index: int
    mesh_refine_budget: int
    resample_seed: int
    # fixed per-sequence surface sampling of the canonical mesh
    mesh_face_idx: np.ndarray = field(repr=False, default=None)
    mesh_bary: np.ndarray = field(repr=False, default=None)

    def copy(self) -> "TrackerState":
        return TrackerState(
            prev_points=self.prev_points.copy(),
            prev_nocs=self.prev_nocs.copy(),
            canonical_mesh=self.canonical_mesh.copy(),
            frame_index=self.frame_index,
            mesh_refine_budget=self.mesh_refine_budget,
            resample_seed=self.resample_seed,
            mesh_face_idx=self.mesh_face_idx.copy(),
            mesh_bary=self.mesh_bary.copy(),
        )


@dataclass
class NocsPrediction:
    points: np.ndarray  # N x 3 resampled task-space input points
    point_indices: np.ndarray  # N indices into the frame's raw point array
    raw_logits: np.ndarray  # N x 3 x B
    refined_logits: np.ndarray  # N x 3 x B
    coords: np.ndarray  # N x 3 decoded refined canonical coordinates


@dataclass
class StepOutput:
    prediction: NocsPrediction
    canonical_mesh: CanonicalMesh
    task_mesh_vertices: np.ndarray  # V x 3 meters
    surface_nocs: np.ndarray  # n_mesh x 3 canonical surface samples
    surface_task: np.ndarray  # n_mesh x 3 warped surface samples (meters)
    timings: dict[str, float]
    state: TrackerState


def resample_points(points: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(len(points), size=n, replace=len(points) < n)
    return idx


def init(first_frame: PointCloudFrame, pose: InitPose, config: RunConfig, seed: int = 0) -> TrackerState:
    """Build the initial tracker state from a first-frame pose."""
    rng = np.random.default_rng(seed)

    if pose.source == "external_file":
        if pose.points is None or pose.nocs is None:
            raise AlignmentError("external pose must carry points and canonical coordinates")
        if len(pose.points) != config.n_pc or len(pose.nocs) != len(pose.points):
            raise AlignmentError(
                f"external pose has {len(pose.points)} points / {len(pose.nocs)} coords; expected {config.n_pc}"
            )
        points, prev_nocs = pose.points, pose.nocs
        mesh = pose.mesh.copy()
    else:
        sel = resample_points(first_frame.points, config.n_pc, rng)
        points = first_frame.points[sel]
        if pose.source == "ground_truth":
            if pose.nocs is not None:
                if len(pose.nocs) != len(first_frame.points):
                    raise AlignmentError("pose coords must align with first-frame points")
                prev_nocs = pose.nocs[sel]
            elif first_frame.gt_nocs is not None:
                prev_nocs = first_frame.gt_nocs[sel]
            else:
                raise AlignmentError("ground_truth init needs canonical labels")
            mesh = pose.mesh.copy()
        elif pose.source == "perturbed":
            base = pose.nocs[sel] if pose.nocs is not None else first_frame.gt_nocs[sel]
            params = nocs_ops.NOISE_LEVELS[config.noise_level]
            prev_nocs = nocs_ops.perturb_nocs(base, params, rng_seed=seed + 1)
            mesh = CanonicalMesh(
                nocs_ops.perturb_mesh_vertices(pose.mesh.vertices, params.s_mesh, rng_seed=seed + 2),
                pose.mesh.faces.copy(),
            )
        else:
            raise ValueError(f"unknown init source {pose.source!r}")

    mesh_rng = np.random.default_rng(seed + 3)
    _, face_idx, bary = sample_surface(mesh.vertices, mesh.faces, config.n_mesh, mesh_rng)

    return TrackerState(
        prev_points=np.asarray(points, dtype=np.float64),
        prev_nocs=np.clip(np.asarray(prev_nocs, dtype=np.float64), 0.0, 1.0),
        canonical_mesh=mesh,
        frame_index=0,
        mesh_refine_budget=config.mesh_refine_budget,
        resample_seed=seed,
        mesh_face_idx=face_idx,
        mesh_bary=bary,
    )


def _decode_logits(logits: torch.Tensor) -> torch.Tensor:
    bins = logits.shape[-1]
    return (logits.argmax(dim=-1).to(logits.dtype) + 0.5) / bins


def step(state: TrackerState, frame: PointCloudFrame, models: TrackerModels, config: RunConfig) -> StepOutput:
    """Track one frame; returns predictions and a fresh state (no mutation)."""
    timings: dict[str, float] = {}
    models.eval()
    dtype = next(models.encoder.parameters()).dtype

    rng = np.random.default_rng((state.resample_seed, state.frame_index + 1))
    sel = resample_points(frame.points, config.n_pc, rng)
    curr_points = frame.points[sel]

    prev_xyz = torch.as_tensor(state.prev_points, dtype=dtype)
    prev_nocs = torch.as_tensor(state.prev_nocs, dtype=dtype)
    curr_xyz = torch.as_tensor(curr_points, dtype=dtype)

    with torch.no_grad():
        t0 = time.perf_counter()
        prev_feats = models.encoder(prev_xyz)
        curr_feats = models.encoder(curr_xyz)
        timings["encoder"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        fused, raw_logits = models.fusion(prev_xyz, prev_nocs, prev_feats, curr_xyz, curr_feats)
        timings["fusion"] = time.perf_counter() - t0

        raw_nocs = _decode_logits(raw_logits)
        mesh_verts = torch.as_tensor(state.canonical_mesh.vertices, dtype=dtype)
        surface_nocs = torch.as_tensor(
            interpolate_attribute(state.canonical_mesh.vertices, state.canonical_mesh.faces, state.mesh_face_idx, state.mesh_bary),
            dtype=dtype,
        )

        t0 = time.perf_counter()
        if config.use_pc_refiner or (config.use_mesh_refiner and state.mesh_refine_budget > 0):
            refined_logits, scale, offset = models.refiner(raw_logits, fused, curr_xyz, raw_nocs, surface_nocs)
            if not config.use_pc_refiner:
                refined_logits = raw_logits
        else:
            refined_logits, scale, offset = raw_logits, torch.ones(3, dtype=dtype), torch.zeros(3, dtype=dtype)

        new_mesh = state.canonical_mesh.copy()
        if config.use_mesh_refiner and state.mesh_refine_budget > 0:
            new_mesh = CanonicalMesh(
                apply_mesh_refinement(mesh_verts, scale, offset).numpy().astype(np.float64),
                state.canonical_mesh.faces.copy(),
            )
            surface_nocs = torch.as_tensor(
                interpolate_attribute(new_mesh.vertices, new_mesh.faces, state.mesh_face_idx, state.mesh_bary),
                dtype=dtype,
            )
        timings["refiner"] = time.perf_counter() - t0

        refined_nocs = _decode_logits(refined_logits)

        t0 = time.perf_counter()
        volume, _ = scatter_max_volume(fused, refined_nocs, config.grid_size)
        dense = models.volume_unet(volume)
        timings["scatter_densify"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        task_mesh = models.warp_decoder(torch.as_tensor(new_mesh.vertices, dtype=dtype), dense)
        surface_task = models.warp_decoder(surface_nocs, dense)
        timings["warp"] = time.perf_counter() - t0

    prediction = NocsPrediction(
        points=curr_points,
        point_indices=sel,
        raw_logits=raw_logits.numpy().astype(np.float64),
        refined_logits=refined_logits.numpy().astype(np.float64),
        coords=refined_nocs.numpy().astype(np.float64),
    )
    new_state = TrackerState(
        prev_points=curr_points.copy(),
        prev_nocs=prediction.coords.copy(),
        canonical_mesh=new_mesh.copy(),
        frame_index=state.frame_index + 1,
        mesh_refine_budget=max(0, state.mesh_refine_budget - (1 if config.use_mesh_refiner and state.mesh_refine_budget > 0 else 0)),
        resample_seed=state.resample_seed,
        mesh_face_idx=state.mesh_face_idx.copy(),
        mesh_bary=state.mesh_bary.copy(),
    )
    return StepOutput(
        prediction=prediction,
        canonical_mesh=new_mesh,
        task_mesh_vertices=task_mesh.numpy().astype(np.float64),
        surface_nocs=surface_nocs.numpy().astype(np.float64),
        surface_task=surface_task.numpy().astype(np.float64),
        timings=timings,
        state=new_state,
    )


def subsample_frames(sequence: SequenceDataset, keep_ratio: float) -> SequenceDataset:
    """Keep frames 0, s, 2s, ... with stride s = 1 / keep_ratio."""
    valid = (1.0, 0.5, 0.25, 1.0 / 6.0, 0.125)
    if not any(abs(keep_ratio - v) < 1e-9 for v in valid):
        raise ValueError(f"keep_ratio must be one of 1, 1/2, 1/4, 1/6, 1/8; got {keep_ratio}")
    stride = round(1.0 / keep_ratio)
    frames = sequence.frames[::stride]
    if len(frames) < 2:
        raise ValueError("fewer than 2 frames remain after subsampling")
    return SequenceDataset(
        category=sequence.category,
        frames=frames,
        canonical_mesh=sequence.canonical_mesh.copy(),
        manifest={**sequence.manifest, "keep_ratio": keep_ratio},
    )


def remove_static_frames(sequence: SequenceDataset, threshold_m: float = 0.001) -> SequenceDataset:
    """Drop frames whose mean vertex displacement from the previous kept
    frame is below the motion threshold. Frame 0 is always kept."""
    frames = [sequence.frames[0]]
    for f in sequence.frames[1:]:
        disp = np.linalg.norm(f.mesh_vertices_task - frames[-1].mesh_vertices_task, axis=1).mean()
        if disp >= threshold_m:
            frames.append(f)
    if len(frames) < 2:
        raise ValueError("fewer than 2 moving frames")
    return SequenceDataset(
        category=sequence.category,
        frames=frames,
        canonical_mesh=sequence.canonical_mesh.copy(),
        manifest=dict(sequence.manifest),
    )


# first-frame pose exchange files: manifest + raw little-endian arrays,
# same container conventions as the dataset format

POSE_MAGIC = "clothtrack-init-pose"


def write_init_pose(path: str | Path, points: np.ndarray, nocs: np.ndarray, mesh: CanonicalMesh) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(points).astype("<f4").tofile(path / "points.bin")
    np.ascontiguousarray(nocs).astype("<f4").tofile(path / "nocs.bin")
    np.ascontiguousarray(mesh.vertices).astype("<f4").tofile(path / "mesh.verts.bin")
    np.ascontiguousarray(mesh.faces).astype("<i4").tofile(path / "mesh.faces.bin")
    manifest = {
        "magic": POSE_MAGIC,
        "version": 1,
        "num_points": int(len(points)),
        "num_vertices": int(len(mesh.vertices)),
        "num_faces": int(len(mesh.faces)),
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return path


def read_init_pose(path: str | Path) -> InitPose:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise AlignmentError(f"unreadable pose manifest: {e}") from e
    if manifest.get("magic") != POSE_MAGIC or manifest.get("version") != 1:
        raise AlignmentError("not a first-frame pose exchange file")
    n, nv, nf = manifest["num_points"], manifest["num_vertices"], manifest["num_faces"]

    def read(name, dtype, shape):
        arr = np.fromfile(path / name, dtype=dtype)
        if arr.size != int(np.prod(shape)):
            raise AlignmentError(f"{name}: truncated array")
        return arr.reshape(shape)

    points = read("points.bin", "<f4", (n, 3)).astype(np.float64)
    coord = read("nocs.bin", "<f4", (n, 3)).astype(np.float64)
    mesh = CanonicalMesh(
        read("mesh.verts.bin", "<f4", (nv, 3)).astype(np.float64),
        read("mesh.faces.bin", "<i4", (nf, 3)).astype(np.int64),
    )
    return InitPose(source="external_file", nocs=coord, mesh=mesh, points=points)
