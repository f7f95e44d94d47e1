"""On-disk sequence format.

Layout: ``<root>/<category>/<seq_id>/manifest.json`` plus raw little-endian
binary arrays - ``canonical_mesh.verts.bin`` / ``canonical_mesh.faces.bin``
and per-frame ``frames/<t>.points.bin`` / ``.nocs.bin`` / ``.mesh.bin``.
Reals are stored as f32, indices as i32; the manifest records all counts so
truncation is detectable.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..geometry import CanonicalMesh, PointCloudFrame, SequenceDataset

MAGIC = "clothtrack-sequence"
FORMAT_VERSION = 1


class DatasetFormatError(ValueError):
    """Manifest or binary payload does not match the expected format."""


class DatasetVersionError(DatasetFormatError):
    """Manifest declares an unsupported format version."""


def _write_array(path: Path, arr: np.ndarray, dtype: str):
    np.ascontiguousarray(arr).astype(dtype).tofile(path)


def _read_array(path: Path, dtype: str, shape: tuple[int, ...]) -> np.ndarray:
    expected = int(np.prod(shape))
    arr = np.fromfile(path, dtype=dtype)
    if arr.size != expected:
        raise DatasetFormatError(f"{path.name}: expected {expected} values, found {arr.size}")
    return arr.reshape(shape)


def sequence_dir(root: str | Path, category: str, seq_id: str) -> Path:
    return Path(root) / category / seq_id


def write_dataset(ds: SequenceDataset, path: str | Path) -> Path:
    """Write one sequence into ``path`` (the ``<category>/<seq_id>`` dir)."""
    path = Path(path)
    frames_dir = path / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    _write_array(path / "canonical_mesh.verts.bin", ds.canonical_mesh.vertices, "<f4")
    _write_array(path / "canonical_mesh.faces.bin", ds.canonical_mesh.faces, "<i4")

    counts = []
    for t, frame in enumerate(ds.frames):
        _write_array(frames_dir / f"{t:05d}.points.bin", frame.points, "<f4")
        _write_array(frames_dir / f"{t:05d}.nocs.bin", frame.gt_nocs, "<f4")
        _write_array(frames_dir / f"{t:05d}.mesh.bin", frame.mesh_vertices_task, "<f4")
        counts.append(len(frame.points))

    manifest = {
        "magic": MAGIC,
        "version": FORMAT_VERSION,
        "category": ds.category,
        "num_frames": len(ds.frames),
        "num_vertices": int(len(ds.canonical_mesh.vertices)),
        "num_faces": int(len(ds.canonical_mesh.faces)),
        "points_per_frame": counts,
        "dtypes": {"real": "<f4", "index": "<i4"},
        **ds.manifest,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return path


def read_dataset(path: str | Path) -> SequenceDataset:
    """Read one sequence directory back; validates magic, version, counts."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise DatasetFormatError(f"no manifest.json in {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"malformed manifest: {e}") from e

    if manifest.get("magic") != MAGIC:
        raise DatasetFormatError(f"bad magic header {manifest.get('magic')!r}")
    if manifest.get("version") != FORMAT_VERSION:
        raise DatasetVersionError(
            f"format version {manifest.get('version')!r} is not supported (reader expects {FORMAT_VERSION})"
        )

    nv = manifest["num_vertices"]
    nf = manifest["num_faces"]
    verts = _read_array(path / "canonical_mesh.verts.bin", "<f4", (nv, 3))
    faces = _read_array(path / "canonical_mesh.faces.bin", "<i4", (nf, 3))
    mesh = CanonicalMesh(verts.astype(np.float64), faces.astype(np.int64))

    frames = []
    for t, n in enumerate(manifest["points_per_frame"]):
        frames.append(
            PointCloudFrame(
                points=_read_array(path / "frames" / f"{t:05d}.points.bin", "<f4", (n, 3)).astype(np.float64),
                gt_nocs=_read_array(path / "frames" / f"{t:05d}.nocs.bin", "<f4", (n, 3)).astype(np.float64),
                mesh_vertices_task=_read_array(path / "frames" / f"{t:05d}.mesh.bin", "<f4", (nv, 3)).astype(np.float64),
            )
        )

    extra = {
        k: v
        for k, v in manifest.items()
        if k not in ("magic", "version", "category", "num_frames", "num_vertices", "num_faces", "points_per_frame", "dtypes")
    }
    return SequenceDataset(category=manifest["category"], frames=frames, canonical_mesh=mesh, manifest=extra)


def list_sequences(root: str | Path) -> list[Path]:
    """All sequence directories under a dataset root, sorted."""
    root = Path(root)
    return sorted(p.parent for p in root.glob("*/*/manifest.json"))
