"""Canonical-to-task mapping.

Per-point fusion features are scattered into a G^3 volume at their
canonical coordinates (channel-wise max per cell, zeros elsewhere), the
volume is densified by a small 3D UNet, and a per-point decoder maps
trilinearly sampled features plus the query coordinate to a task-space
position.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .common import mlp


def scatter_max_volume(features: torch.Tensor, nocs: torch.Tensor, grid: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Scatter N x C features into a C x G x G x G volume.

    Cell index per point is min(floor(c * G), G - 1) per axis; colliding
    features reduce by channel-wise max; untouched cells are exactly zero.
    Returns (volume, occupancy mask G x G x G).
    """
    if features.ndim != 2 or nocs.shape != (len(features), 3):
        raise ValueError("features must be N x C aligned with N x 3 coords")
    if len(nocs) and (nocs.min() < 0 or nocs.max() > 1):
        raise ValueError("canonical coordinates must lie in [0, 1]")
    c = features.shape[1]
    dev = features.device
    idx3 = torch.clamp((nocs * grid).floor().to(torch.int64), max=grid - 1)
    flat = (idx3[:, 0] * grid + idx3[:, 1]) * grid + idx3[:, 2]

    volume = torch.zeros(grid**3, c, dtype=features.dtype, device=dev)
    mask = torch.zeros(grid**3, dtype=torch.bool, device=dev)
    if len(features):
        volume = volume.scatter_reduce(
            0, flat[:, None].expand(-1, c), features, reduce="amax", include_self=False
        )
        mask[flat] = True
    return volume.T.reshape(c, grid, grid, grid), mask.reshape(grid, grid, grid)


class VolumeUNet(nn.Module):
    """Three-level dense 3D UNet that densifies the scattered volume."""

    def __init__(self, in_channels: int = 128, out_channels: int = 64, base: int = 32):
        super().__init__()
        c0, c1, c2 = base, base * 2, base * 4
        self.inp = nn.Conv3d(in_channels, c0, 3, padding=1)
        self.enc0 = nn.Conv3d(c0, c0, 3, padding=1)
        self.down1 = nn.Conv3d(c0, c1, 3, stride=2, padding=1)
        self.enc1 = nn.Conv3d(c1, c1, 3, padding=1)
        self.down2 = nn.Conv3d(c1, c2, 3, stride=2, padding=1)
        self.enc2 = nn.Conv3d(c2, c2, 3, padding=1)
        self.up1 = nn.Conv3d(c2, c1, 3, padding=1)
        self.dec1 = nn.Conv3d(2 * c1, c1, 3, padding=1)
        self.up0 = nn.Conv3d(c1, c0, 3, padding=1)
        self.dec0 = nn.Conv3d(2 * c0, c0, 3, padding=1)
        self.out = nn.Conv3d(c0, out_channels, 3, padding=1)

    def forward(self, volume: torch.Tensor) -> torch.Tensor:
        x = volume[None] if volume.ndim == 4 else volume
        e0 = F.relu(self.enc0(F.relu(self.inp(x))))
        e1 = F.relu(self.enc1(F.relu(self.down1(e0))))
        e2 = F.relu(self.enc2(F.relu(self.down2(e1))))
        u1 = F.interpolate(e2, size=e1.shape[2:], mode="nearest")
        d1 = F.relu(self.dec1(torch.cat([F.relu(self.up1(u1)), e1], dim=1)))
        u0 = F.interpolate(d1, size=e0.shape[2:], mode="nearest")
        d0 = F.relu(self.dec0(torch.cat([F.relu(self.up0(u0)), e0], dim=1)))
        out = self.out(d0)
        return out[0] if volume.ndim == 4 else out


def trilinear_sample(volume: torch.Tensor, queries: torch.Tensor) -> torch.Tensor:
    """Sample a C x G x G x G volume at unit-cube query points.

    Cell centers sit at (i + 0.5) / G; samples are clamped to the valid
    center range so a query at an exact center returns that cell's feature.
    """
    c, g = volume.shape[0], volume.shape[1]
    u = torch.clamp(queries * g - 0.5, 0.0, g - 1.0)
    i0 = torch.clamp(u.floor().to(torch.int64), max=g - 2) if g > 1 else u.to(torch.int64) * 0
    frac = u - i0
    flat = volume.reshape(c, -1)

    out = torch.zeros(len(queries), c, dtype=volume.dtype, device=volume.device)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                ix = i0[:, 0] + dx
                iy = i0[:, 1] + dy
                iz = i0[:, 2] + dz
                w = (
                    (frac[:, 0] if dx else 1 - frac[:, 0])
                    * (frac[:, 1] if dy else 1 - frac[:, 1])
                    * (frac[:, 2] if dz else 1 - frac[:, 2])
                )
                out = out + w[:, None] * flat[:, (ix * g + iy) * g + iz].T
    return out


class WarpDecoder(nn.Module):
    """Implicit per-point map from canonical queries to task-space meters."""

    def __init__(self, volume_channels: int = 64, hidden: tuple[int, ...] = (128, 128)):
        super().__init__()
        self.net = mlp([volume_channels + 3, *hidden, 3])

    def forward(self, queries: torch.Tensor, volume: torch.Tensor) -> torch.Tensor:
        if len(queries) and (queries.min() < 0 or queries.max() > 1):
            raise ValueError("queries must lie in [0, 1]")
        feats = trilinear_sample(volume, queries)
        return self.net(torch.cat([feats, queries], dim=1))


def warp_loss(pred_xyz: torch.Tensor, gt_xyz: torch.Tensor) -> torch.Tensor:
    """Mean squared task-space distance (m^2)."""
    if pred_xyz.shape != gt_xyz.shape:
        raise ValueError("misaligned warp supervision")
    return ((pred_xyz - gt_xyz) ** 2).sum(dim=1).mean()
