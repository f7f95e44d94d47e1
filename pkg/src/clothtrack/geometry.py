"""Core geometry containers shared by the generator, tracker and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class CanonicalMesh:
    """Triangle mesh in canonical space; vertices live in the unit cube.

    Meshes may be open (garments are thin shells) - nothing here assumes a
    watertight surface.
    """

    vertices: np.ndarray  # V x 3 float in [0, 1]
    faces: np.ndarray  # F x 3 int vertex indices

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError(f"bad vertex array shape {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError(f"bad face array shape {self.faces.shape}")
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValueError("face indices out of range")

    def copy(self) -> "CanonicalMesh":
        return CanonicalMesh(self.vertices.copy(), self.faces.copy())


@dataclass
class PointCloudFrame:
    """One observed time step of a deforming garment.

    ``points`` are task-space meters. Synthetic frames also carry the
    per-point canonical labels and the full posed mesh vertices.
    """

    points: np.ndarray  # N x 3 meters
    gt_nocs: np.ndarray | None = None  # N x 3 in [0, 1]
    mesh_vertices_task: np.ndarray | None = None  # V x 3 meters

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3 or len(self.points) == 0:
            raise ValueError(f"bad point array shape {self.points.shape}")
        if self.gt_nocs is not None:
            self.gt_nocs = np.asarray(self.gt_nocs, dtype=np.float64)
            if self.gt_nocs.shape != self.points.shape:
                raise ValueError("gt_nocs must align with points")
        if self.mesh_vertices_task is not None:
            self.mesh_vertices_task = np.asarray(self.mesh_vertices_task, dtype=np.float64)


@dataclass
class SequenceDataset:
    """One manipulation video: ordered frames plus the shared canonical mesh."""

    category: str
    frames: list[PointCloudFrame]
    canonical_mesh: CanonicalMesh
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.frames) < 2:
            raise ValueError("a sequence needs at least 2 frames")
        nv = len(self.canonical_mesh.vertices)
        for f in self.frames:
            if f.mesh_vertices_task is not None and len(f.mesh_vertices_task) != nv:
                raise ValueError("frame mesh vertex count differs from canonical mesh")

    def __len__(self) -> int:
        return len(self.frames)


def triangle_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_surface(
    vertices: np.ndarray,
    faces: np.ndarray,
    n: int,
    rng: np.random.Generator,
    face_weights: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Area-weighted uniform sampling on a triangle mesh surface.

    Returns (points, face_idx, barycentric) so the same samples can be
    re-evaluated on any other vertex attribute (e.g. another frame's pose).
    """
    if n <= 0:
        raise ValueError("n must be positive")
    areas = triangle_areas(vertices, faces)
    if face_weights is not None:
        areas = areas * face_weights
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero sampleable area")
    face_idx = rng.choice(len(faces), size=n, p=areas / total)
    # uniform barycentric via square-root trick
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    bary = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
    points = interpolate_attribute(vertices, faces, face_idx, bary)
    return points, face_idx, bary


def interpolate_attribute(
    vertex_attr: np.ndarray, faces: np.ndarray, face_idx: np.ndarray, bary: np.ndarray
) -> np.ndarray:
    """Barycentric interpolation of a per-vertex attribute at surface samples."""
    tri = vertex_attr[faces[face_idx]]  # n x 3 x C
    return np.einsum("nk,nkc->nc", bary, tri)
