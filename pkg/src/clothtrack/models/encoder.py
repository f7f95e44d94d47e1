"""Per-point geometric feature extraction.

A UNet over hash-indexed sparse voxels: points are quantized at a fixed
voxel size, convolutions run only on occupied sites (3x3x3 neighborhoods
resolved through a sorted-key lookup), with strided downsampling, skip
connections and residual blocks. Input features are plain occupancy, so
the output depends only on the voxel pattern and every point inside one
voxel receives that voxel's decoded feature.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

_KEY_BASE = 1 << 19  # coordinate offset; supports |coord| < 2^19 per axis


def _encode(coords: torch.Tensor) -> torch.Tensor:
    return ((coords[:, 0] + _KEY_BASE) << 40) + ((coords[:, 1] + _KEY_BASE) << 20) + (coords[:, 2] + _KEY_BASE)


def _decode(keys: torch.Tensor) -> torch.Tensor:
    x = (keys >> 40) - _KEY_BASE
    y = ((keys >> 20) & ((1 << 20) - 1)) - _KEY_BASE
    z = (keys & ((1 << 20) - 1)) - _KEY_BASE
    return torch.stack([x, y, z], dim=1)


class _VoxelIndex:
    """Sorted-key lookup from integer voxel coordinates to row indices."""

    def __init__(self, coords: torch.Tensor):
        self.coords = coords
        keys = _encode(coords)
        self.sorted_keys, self.perm = torch.sort(keys)

    def lookup(self, query: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        q = _encode(query)
        pos = torch.searchsorted(self.sorted_keys, q).clamp(max=len(self.sorted_keys) - 1)
        found = self.sorted_keys[pos] == q
        return self.perm[pos], found


_OFFSETS_27 = torch.tensor(
    [[dx, dy, dz] for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)], dtype=torch.int64
)


class SparseConv(nn.Module):
    """3x3x3 convolution over occupied voxels (output sites = input sites)."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(27, in_ch, out_ch))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        nn.init.kaiming_uniform_(self.weight.view(27 * in_ch, out_ch), a=5**0.5)

    def forward(self, feats: torch.Tensor, index: _VoxelIndex) -> torch.Tensor:
        coords = index.coords
        out = self.bias.expand(len(coords), -1).to(feats.dtype).clone()
        for k, off in enumerate(_OFFSETS_27.to(coords.device)):
            nbr, found = index.lookup(coords + off)
            contrib = feats[nbr] @ self.weight[k].to(feats.dtype)
            out = out + torch.where(found[:, None], contrib, torch.zeros_like(contrib))
        return out


class SparseResBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv1 = SparseConv(ch, ch)
        self.conv2 = SparseConv(ch, ch)

    def forward(self, feats, index):
        h = F.relu(self.conv1(feats, index))
        h = self.conv2(h, index)
        return F.relu(feats + h)


class SparseDownsample(nn.Module):
    """Stride-2 kernel-2 convolution: children sum into their parent voxel."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(8, in_ch, out_ch))
        self.bias = nn.Parameter(torch.zeros(out_ch))
        nn.init.kaiming_uniform_(self.weight.view(8 * in_ch, out_ch), a=5**0.5)

    def forward(self, feats: torch.Tensor, index: _VoxelIndex) -> tuple[torch.Tensor, _VoxelIndex]:
        parent_coords = torch.div(index.coords, 2, rounding_mode="floor")
        keys = _encode(parent_coords)
        uniq, inv = torch.unique(keys, return_inverse=True)
        coarse = _VoxelIndex(_decode(uniq))
        child = index.coords - parent_coords * 2  # each component in {0, 1}
        child_id = child[:, 0] * 4 + child[:, 1] * 2 + child[:, 2]
        out = self.bias.expand(len(uniq), -1).to(feats.dtype).clone()
        for k in range(8):
            sel = child_id == k
            if sel.any():
                out = out.index_add(0, inv[sel], feats[sel] @ self.weight[k].to(feats.dtype))
        return out, coarse


class SparseUpsample(nn.Module):
    """Nearest-parent upsampling with a linear map (1x1 transpose conv)."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.linear = nn.Linear(in_ch, out_ch)

    def forward(self, coarse_feats: torch.Tensor, coarse_index: _VoxelIndex, fine_index: _VoxelIndex) -> torch.Tensor:
        parents = torch.div(fine_index.coords, 2, rounding_mode="floor")
        idx, found = coarse_index.lookup(parents)
        assert bool(found.all()), "fine voxel without parent"
        return self.linear(coarse_feats[idx])


class PointFeatureEncoder(nn.Module):
    """Voxel-hash UNet producing one feature vector per input point.

    ``enc_channels`` follows the stem + three strided stages layout; the
    decoder mirrors it with skip connections and ends in a per-point linear
    to ``feature_dim``. Points are zero-centered per cloud before
    voxelization (removes global translation).
    """

    def __init__(
        self,
        feature_dim: int = 64,
        voxel_size: float = 0.01,
        enc_channels: tuple[int, ...] = (64, 64, 128, 256),
        dec_channels: tuple[int, ...] = (128, 64, 64),
        zero_center: bool = True,
    ):
        super().__init__()
        self.feature_dim = feature_dim
        self.voxel_size = voxel_size
        self.zero_center = zero_center
        c0, c1, c2, c3 = enc_channels
        d2, d1, d0 = dec_channels

        self.stem = SparseConv(1, c0)
        self.enc0 = SparseResBlock(c0)
        self.down1 = SparseDownsample(c0, c1)
        self.enc1 = SparseResBlock(c1)
        self.down2 = SparseDownsample(c1, c2)
        self.enc2 = SparseResBlock(c2)
        self.down3 = SparseDownsample(c2, c3)
        self.enc3 = SparseResBlock(c3)

        self.up3 = SparseUpsample(c3, d2)
        self.fuse2 = nn.Linear(d2 + c2, d2)
        self.dec2 = SparseResBlock(d2)
        self.up2 = SparseUpsample(d2, d1)
        self.fuse1 = nn.Linear(d1 + c1, d1)
        self.dec1 = SparseResBlock(d1)
        self.up1 = SparseUpsample(d1, d0)
        self.fuse0 = nn.Linear(d0 + c0, d0)
        self.dec0 = SparseResBlock(d0)
        self.head = nn.Linear(d0, feature_dim)

    def voxelize(self, points: torch.Tensor) -> tuple[_VoxelIndex, torch.Tensor]:
        """Quantize points; returns the level-0 index and per-point voxel row.

        Voxel rows are key-sorted, so the result is independent of point
        order.
        """
        vox = torch.floor(points / self.voxel_size).to(torch.int64)
        keys = _encode(vox)
        uniq, inv = torch.unique(keys, return_inverse=True)
        return _VoxelIndex(_decode(uniq)), inv

    def forward(self, points: torch.Tensor) -> torch.Tensor:
        if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
            raise ValueError(f"expected non-empty N x 3 points, got {tuple(points.shape)}")
        if self.zero_center:
            points = points - points.mean(dim=0, keepdim=True)

        idx0, point_to_voxel = self.voxelize(points)
        occ = torch.ones(len(idx0.coords), 1, dtype=points.dtype, device=points.device)

        x0 = self.enc0(F.relu(self.stem(occ, idx0)), idx0)
        x1, idx1 = self.down1(x0, idx0)
        x1 = self.enc1(F.relu(x1), idx1)
        x2, idx2 = self.down2(x1, idx1)
        x2 = self.enc2(F.relu(x2), idx2)
        x3, idx3 = self.down3(x2, idx2)
        x3 = self.enc3(F.relu(x3), idx3)

        y2 = self.dec2(F.relu(self.fuse2(torch.cat([self.up3(x3, idx3, idx2), x2], dim=1))), idx2)
        y1 = self.dec1(F.relu(self.fuse1(torch.cat([self.up2(y2, idx2, idx1), x1], dim=1))), idx1)
        y0 = self.dec0(F.relu(self.fuse0(torch.cat([self.up1(y1, idx1, idx0), x0], dim=1))), idx0)
        voxel_feats = self.head(y0)
        return voxel_feats[point_to_voxel]
