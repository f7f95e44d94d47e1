"""Depth-only partial-view rendering.

A low-resolution orthographic z-buffer per camera decides which faces are
visible; points are then sampled uniformly over the visible surface area
and carry barycentrically interpolated canonical labels. Sampled points
lie exactly on the mesh surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import interpolate_attribute, sample_surface, triangle_areas


class RenderError(RuntimeError):
    """Mesh invisible from every camera."""


@dataclass(frozen=True)
class Camera:
    """Orthographic camera defined by position and look-at target."""

    position: np.ndarray
    target: np.ndarray

    def axes(self):
        forward = np.asarray(self.target, dtype=np.float64) - np.asarray(self.position, dtype=np.float64)
        forward = forward / np.linalg.norm(forward)
        up_hint = np.array([0.0, 0.0, 1.0])
        if abs(forward @ up_hint) > 0.99:
            up_hint = np.array([0.0, 1.0, 0.0])
        right = np.cross(forward, up_hint)
        right /= np.linalg.norm(right)
        up = np.cross(right, forward)
        return right, up, forward


def default_camera_rig(k: int, center: np.ndarray, radius: float) -> list[Camera]:
    """K cameras on a ring above the table, all aimed at the center."""
    if k < 1:
        raise ValueError("need at least one camera")
    cams = []
    for i in range(k):
        phi = 2.0 * np.pi * i / k
        pos = center + radius * np.array([np.cos(phi), np.sin(phi), 0.9])
        cams.append(Camera(position=pos, target=np.asarray(center, dtype=np.float64)))
    return cams


def visible_faces(vertices: np.ndarray, faces: np.ndarray, camera: Camera, resolution: int = 96) -> np.ndarray:
    """Face indices that win at least one z-buffer pixel for this camera."""
    right, up, forward = camera.axes()
    rel = vertices - np.asarray(camera.position, dtype=np.float64)
    u = rel @ right
    v = rel @ up
    depth = rel @ forward

    in_front = depth > 0
    if not in_front.any():
        return np.zeros(0, dtype=np.int64)

    u0, u1 = u[in_front].min(), u[in_front].max()
    v0, v1 = v[in_front].min(), v[in_front].max()
    span = max(u1 - u0, v1 - v0, 1e-9) * 1.01
    px = (u - u0) / span * (resolution - 1)
    py = (v - v0) / span * (resolution - 1)

    zbuf = np.full((resolution, resolution), np.inf)
    fbuf = np.full((resolution, resolution), -1, dtype=np.int64)

    for fi, face in enumerate(faces):
        if not in_front[face].all():
            continue
        xs, ys, zs = px[face], py[face], depth[face]
        x_min = max(int(np.floor(xs.min())), 0)
        x_max = min(int(np.ceil(xs.max())), resolution - 1)
        y_min = max(int(np.floor(ys.min())), 0)
        y_max = min(int(np.ceil(ys.max())), resolution - 1)
        if x_min > x_max or y_min > y_max:
            continue
        gx, gy = np.meshgrid(np.arange(x_min, x_max + 1), np.arange(y_min, y_max + 1), indexing="ij")
        # barycentric coordinates of pixel centers in the projected triangle
        d = (ys[1] - ys[2]) * (xs[0] - xs[2]) + (xs[2] - xs[1]) * (ys[0] - ys[2])
        if abs(d) < 1e-12:
            continue
        w0 = ((ys[1] - ys[2]) * (gx - xs[2]) + (xs[2] - xs[1]) * (gy - ys[2])) / d
        w1 = ((ys[2] - ys[0]) * (gx - xs[2]) + (xs[0] - xs[2]) * (gy - ys[2])) / d
        w2 = 1.0 - w0 - w1
        inside = (w0 >= -1e-9) & (w1 >= -1e-9) & (w2 >= -1e-9)
        if not inside.any():
            continue
        z = w0 * zs[0] + w1 * zs[1] + w2 * zs[2]
        sel_x, sel_y = gx[inside], gy[inside]
        z = z[inside]
        closer = z < zbuf[sel_x, sel_y]
        zbuf[sel_x[closer], sel_y[closer]] = z[closer]
        fbuf[sel_x[closer], sel_y[closer]] = fi

    return np.unique(fbuf[fbuf >= 0])


def render_partial(
    vertices_task: np.ndarray,
    faces: np.ndarray,
    vertex_nocs: np.ndarray,
    cameras: list[Camera],
    n_samples: int,
    rng: np.random.Generator,
    resolution: int = 96,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample a partial point cloud over the union of visible faces.

    Returns (points N x 3 meters, gt_nocs N x 3). Raises RenderError if the
    mesh is invisible from every camera.
    """
    if len(cameras) < 1:
        raise ValueError("need at least one camera")
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")

    vis = np.zeros(len(faces), dtype=bool)
    for cam in cameras:
        vis[visible_faces(vertices_task, faces, cam, resolution)] = True
    if not vis.any():
        raise RenderError("mesh is outside every camera frustum")

    weights = np.where(vis, 1.0, 0.0)
    points, face_idx, bary = sample_surface(vertices_task, faces, n_samples, rng, face_weights=weights)
    gt_nocs = interpolate_attribute(vertex_nocs, faces, face_idx, bary)
    return points, np.clip(gt_nocs, 0.0, 1.0)


def ray_mesh_intersections(origin: np.ndarray, direction: np.ndarray, vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """All ray parameters t > 0 where the ray hits the mesh (test oracle).

    Vectorized Moller-Trumbore over all faces.
    """
    v0 = vertices[faces[:, 0]]
    e1 = vertices[faces[:, 1]] - v0
    e2 = vertices[faces[:, 2]] - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-12
    inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,j->i", qvec, direction) * inv_det
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    hit = ok & (u >= -1e-9) & (v >= -1e-9) & (u + v <= 1 + 1e-9) & (t > 1e-9)
    return t[hit]
