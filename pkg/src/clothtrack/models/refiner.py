"""Second-stage refinement of canonical predictions.

Two intertwined branches: the PC branch predicts residual corrections to
the per-point classification logits; the Mesh branch predicts one global
scale and offset for the canonical shape. Each branch consumes the other's
max-pooled global feature. Both heads are zero-initialized so the refiner
starts as an exact no-op.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .common import mlp, scale_widths, zero_init_final


class NocsRefiner(nn.Module):
    def __init__(self, fusion_dim: int = 128, bins: int = 64, channel_scale: int = 1):
        super().__init__()
        self.bins = bins
        logit_dim = 3 * bins
        pc_in = logit_dim + fusion_dim + 6  # logits, fusion feature, xyz, decoded coords

        pn = scale_widths([256, 256, 1024], channel_scale)
        self.pc_pointnet = mlp([pc_in, *pn], final_activation=True)
        mn = scale_widths([64, 128, 1024], channel_scale)
        self.mesh_pointnet = mlp([3, *mn], final_activation=True)
        fusion_widths = scale_widths([512, 512, 1024], channel_scale)
        self.mesh_fusion = mlp([mn[-1] + pn[-1], *fusion_widths], final_activation=True)
        self.mesh_head = mlp([fusion_widths[-1], *scale_widths([512, 256], channel_scale), 6])
        # a global scale/offset error shows up directly in the per-axis
        # moments of the two point sets; a dedicated branch keeps that
        # signal from drowning in the pooled features
        self.moment_head = mlp([12, 64, 64, 6])
        self.pc_head = mlp([pn[-1] + fusion_widths[-1], *scale_widths([1024, 512], channel_scale), logit_dim])
        zero_init_final(self.mesh_head)
        zero_init_final(self.moment_head)
        zero_init_final(self.pc_head)

    def forward(
        self,
        raw_logits: torch.Tensor,  # N x 3 x B
        fusion_feats: torch.Tensor,  # N x D
        pc_xyz: torch.Tensor,  # N x 3
        raw_nocs: torch.Tensor,  # N x 3
        mesh_points: torch.Tensor,  # M x 3 canonical surface samples
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns (refined_logits N x 3 x B, scale 3, offset 3)."""
        n = len(pc_xyz)
        if raw_logits.shape != (n, 3, self.bins) or len(fusion_feats) != n or len(raw_nocs) != n:
            raise ValueError("misaligned per-point refiner inputs")
        if len(mesh_points) < 1:
            raise ValueError("empty canonical shape")

        pc_in = torch.cat([raw_logits.reshape(n, -1), fusion_feats, pc_xyz, raw_nocs], dim=1)
        pc_dense = self.pc_pointnet(pc_in)
        pc_global = pc_dense.max(dim=0).values

        mesh_dense = self.mesh_pointnet(mesh_points)
        mesh_fused = self.mesh_fusion(torch.cat([mesh_dense, pc_global.expand(len(mesh_points), -1)], dim=1))
        mesh_global = mesh_fused.max(dim=0).values

        moments = torch.cat([
            mesh_points.mean(dim=0),
            mesh_points.std(dim=0, unbiased=False),
            raw_nocs.mean(dim=0),
            raw_nocs.std(dim=0, unbiased=False),
        ])
        raw6 = self.mesh_head(mesh_global) + self.moment_head(moments)
        scale = 1.0 + 0.5 * torch.tanh(raw6[:3])
        offset = 0.25 * torch.tanh(raw6[3:])

        delta = self.pc_head(torch.cat([pc_dense, mesh_global.expand(n, -1)], dim=1))
        refined_logits = raw_logits + delta.view(n, 3, self.bins)
        return refined_logits, scale, offset


def apply_mesh_refinement(mesh_points: torch.Tensor, scale: torch.Tensor, offset: torch.Tensor) -> torch.Tensor:
    """v' = clamp(v * scale + offset, 0, 1)."""
    return torch.clamp(mesh_points * scale + offset, 0.0, 1.0)


def mesh_l2_loss(refined_mesh: torch.Tensor, gt_mesh: torch.Tensor) -> torch.Tensor:
    """Mean squared vertex distance (canonical units)."""
    if refined_mesh.shape != gt_mesh.shape:
        raise ValueError("misaligned mesh point sets")
    return ((refined_mesh - gt_mesh) ** 2).sum(dim=1).mean()


def refiner_losses(refined_logits, gt_bins, refined_mesh, gt_mesh):
    """(cross-entropy on refined logits, mesh L2) as used in training."""
    from .fusion import nocs_classification_loss

    return nocs_classification_loss(refined_logits, gt_bins), mesh_l2_loss(refined_mesh, gt_mesh)
