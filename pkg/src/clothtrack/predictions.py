"""On-disk container for tracking outputs (same conventions as datasets)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .synth.dataset_io import DatasetFormatError, _read_array, _write_array
from .tracker import StepOutput

PRED_MAGIC = "clothtrack-predictions"
PRED_VERSION = 1


def write_predictions(outputs: list[StepOutput], path: str | Path, extra_manifest: dict | None = None) -> Path:
    path = Path(path)
    frames_dir = path / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    timings = []
    counts = []
    for t, out in enumerate(outputs):
        pred = out.prediction
        _write_array(frames_dir / f"{t:05d}.points.bin", pred.points, "<f4")
        _write_array(frames_dir / f"{t:05d}.indices.bin", pred.point_indices, "<i4")
        _write_array(frames_dir / f"{t:05d}.pred_nocs.bin", pred.coords, "<f4")
        _write_array(frames_dir / f"{t:05d}.task_mesh.bin", out.task_mesh_vertices, "<f4")
        _write_array(frames_dir / f"{t:05d}.canonical.bin", out.canonical_mesh.vertices, "<f4")
        _write_array(frames_dir / f"{t:05d}.surface_nocs.bin", out.surface_nocs, "<f4")
        _write_array(frames_dir / f"{t:05d}.surface_task.bin", out.surface_task, "<f4")
        timings.append(out.timings)
        counts.append(len(pred.points))

    if outputs:
        _write_array(path / "faces.bin", outputs[0].canonical_mesh.faces, "<i4")
    manifest = {
        "magic": PRED_MAGIC,
        "version": PRED_VERSION,
        "num_frames": len(outputs),
        "points_per_frame": counts,
        "num_vertices": int(len(outputs[0].canonical_mesh.vertices)) if outputs else 0,
        "num_faces": int(len(outputs[0].canonical_mesh.faces)) if outputs else 0,
        "num_surface": int(len(outputs[0].surface_nocs)) if outputs else 0,
        "timings": timings,
        **(extra_manifest or {}),
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return path


def read_predictions(path: str | Path) -> dict:
    """Read a prediction directory back as plain arrays."""
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetFormatError(f"unreadable prediction manifest: {e}") from e
    if manifest.get("magic") != PRED_MAGIC:
        raise DatasetFormatError(f"bad magic header {manifest.get('magic')!r}")
    if manifest.get("version") != PRED_VERSION:
        raise DatasetFormatError(f"unsupported prediction version {manifest.get('version')!r}")

    nv, ns = manifest["num_vertices"], manifest["num_surface"]
    frames = []
    for t, n in enumerate(manifest["points_per_frame"]):
        d = path / "frames"
        frames.append(
            {
                "points": _read_array(d / f"{t:05d}.points.bin", "<f4", (n, 3)).astype(np.float64),
                "indices": _read_array(d / f"{t:05d}.indices.bin", "<i4", (n,)).astype(np.int64),
                "pred_nocs": _read_array(d / f"{t:05d}.pred_nocs.bin", "<f4", (n, 3)).astype(np.float64),
                "task_mesh": _read_array(d / f"{t:05d}.task_mesh.bin", "<f4", (nv, 3)).astype(np.float64),
                "canonical": _read_array(d / f"{t:05d}.canonical.bin", "<f4", (nv, 3)).astype(np.float64),
                "surface_nocs": _read_array(d / f"{t:05d}.surface_nocs.bin", "<f4", (ns, 3)).astype(np.float64),
                "surface_task": _read_array(d / f"{t:05d}.surface_task.bin", "<f4", (ns, 3)).astype(np.float64),
            }
        )
    faces = _read_array(path / "faces.bin", "<i4", (manifest["num_faces"], 3)).astype(np.int64)
    return {"manifest": manifest, "frames": frames, "faces": faces}
