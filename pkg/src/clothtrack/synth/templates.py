"""Schematic flattened garment templates.

Each category is a union of axis-aligned rectangular grid patches in the
unit square (canonical z fixed at 0.5). A vertex's canonical coordinate is
its template position, so the template itself defines the ground-truth
labels. Patches are laid out symmetrically about x = 0.5 so that
left/right fold scripts have exact mirror partners.

Vertex counts are closed-form: a patch spanning (w, h) of the unit square
at resolution r contributes (round(w*r)+1) * (round(h*r)+1) vertices;
patches are not stitched (seam vertices are duplicated, which is harmless
for an open shell).
"""

from __future__ import annotations

import numpy as np

from ..geometry import CanonicalMesh

# (x0, x1, y0, y1) boxes per category, all symmetric about x = 0.5
_LAYOUTS = {
    "Shirt": [
        (0.30, 0.70, 0.10, 0.70),  # trunk
        (0.05, 0.30, 0.50, 0.70),  # left sleeve
        (0.70, 0.95, 0.50, 0.70),  # right sleeve
    ],
    "Pants": [
        (0.30, 0.70, 0.60, 0.90),  # waist band
        (0.30, 0.48, 0.10, 0.60),  # left leg
        (0.52, 0.70, 0.10, 0.60),  # right leg
    ],
    "Top": [
        (0.25, 0.75, 0.15, 0.75),
    ],
    "Skirt": [
        (0.20, 0.80, 0.10, 0.70),
    ],
}

CATEGORIES = tuple(_LAYOUTS)


def _grid_patch(x0, x1, y0, y1, nx, ny):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, 0.5)], axis=1)
    faces = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = (i + 1) * (ny + 1) + j
            faces.append([a, b, a + 1])
            faces.append([b, b + 1, a + 1])
    return verts, np.array(faces, dtype=np.int64)


def patch_vertex_count(box, resolution: int) -> int:
    x0, x1, y0, y1 = box
    nx = max(1, round((x1 - x0) * resolution))
    ny = max(1, round((y1 - y0) * resolution))
    return (nx + 1) * (ny + 1)


def template_vertex_count(category: str, resolution: int) -> int:
    """Closed-form vertex count of make_template output."""
    return sum(patch_vertex_count(box, resolution) for box in _LAYOUTS[category])


def make_template(category: str, resolution: int, shape_jitter: float = 0.0, jitter_seed: int = 0) -> CanonicalMesh:
    """Build the flattened canonical template mesh for a category.

    ``resolution`` is grid cells per unit length (>= 4). ``shape_jitter``
    scales the layout about (0.5, 0.5) by a per-axis factor drawn from
    U(1-jitter, 1+jitter) to emulate per-instance shape variation; the
    vertex count is unchanged by jitter.
    """
    if category not in _LAYOUTS:
        raise ValueError(f"unknown category {category!r}; expected one of {CATEGORIES}")
    if resolution < 4:
        raise ValueError("resolution must be >= 4")

    sx = sy = 1.0
    if shape_jitter > 0:
        rng = np.random.default_rng(jitter_seed)
        sx, sy = rng.uniform(1.0 - shape_jitter, 1.0 + shape_jitter, size=2)

    all_verts = []
    all_faces = []
    offset = 0
    for box in _LAYOUTS[category]:
        x0, x1, y0, y1 = box
        nx = max(1, round((x1 - x0) * resolution))
        ny = max(1, round((y1 - y0) * resolution))
        verts, faces = _grid_patch(x0, x1, y0, y1, nx, ny)
        all_verts.append(verts)
        all_faces.append(faces + offset)
        offset += len(verts)

    vertices = np.concatenate(all_verts)
    # jitter about the square center, staying inside [0, 1] for jitter < 0.25
    vertices[:, 0] = 0.5 + (vertices[:, 0] - 0.5) * sx
    vertices[:, 1] = 0.5 + (vertices[:, 1] - 0.5) * sy
    vertices = np.clip(vertices, 0.0, 1.0)
    return CanonicalMesh(vertices, np.concatenate(all_faces))
