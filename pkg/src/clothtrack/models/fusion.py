"""Inter-frame feature fusion and the raw canonical-coordinate head.

Single-layer single-head relation attention with L2-normalized query/key
projections: self-attention inside each frame, then cross-attention with
queries from the current frame and keys/values from the previous one. The
previous frame's canonical coordinates enter through a positional
embedding added to the encoder features.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .common import mlp


class PositionalEmbedding(nn.Module):
    """Learned per-point embeddings for the two frames.

    Previous frame: MLP over [xyz, canonical coords] (6-d input); current
    frame: MLP over xyz alone. With ``use_nocs=False`` the previous-frame
    input drops the canonical coordinates (ablation hook).
    """

    def __init__(self, dim: int = 64, hidden: int = 64, use_nocs: bool = True):
        super().__init__()
        self.use_nocs = use_nocs
        self.f1 = mlp([6 if use_nocs else 3, hidden, dim])
        self.f2 = mlp([3, hidden, dim])

    def forward(self, prev_xyz: torch.Tensor, prev_nocs: torch.Tensor | None, curr_xyz: torch.Tensor):
        if self.use_nocs:
            if prev_nocs is None:
                raise ValueError("previous-frame canonical coordinates required")
            if prev_nocs.min() < 0 or prev_nocs.max() > 1:
                raise ValueError("canonical coordinates must lie in [0, 1] (clamp upstream)")
            emb1 = self.f1(torch.cat([prev_xyz, prev_nocs], dim=1))
        else:
            emb1 = self.f1(prev_xyz)
        return emb1, self.f2(curr_xyz)


class RelationAttention(nn.Module):
    """Att(Q, K, V) with cosine-similarity logits.

    Q/K/V are projected to ``mid`` channels; projected Q and K rows are
    L2-normalized before the similarity (V stays unnormalized), a learned
    gain sharpens the softmax, and the attention product plus a query skip
    projection passes through a final per-point MLP. The skip keeps
    per-point identity alive when attention starts out diffuse; without it
    the attended rows collapse to the frame mean and the downstream
    classifier cannot separate points.
    """

    def __init__(self, dim: int = 64, mid: int = 64, out_channels: tuple[int, ...] = (64,)):
        super().__init__()
        self.proj_q = nn.Linear(dim, mid)
        self.proj_k = nn.Linear(dim, mid)
        self.proj_v = nn.Linear(dim, mid)
        self.proj_skip = nn.Linear(dim, mid)
        self.logit_scale = nn.Parameter(torch.tensor(10.0))
        self.out = mlp([mid, *out_channels])

    def forward(self, q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
        if len(k) == 0:
            raise ValueError("empty key set")
        qn = F.normalize(self.proj_q(q), dim=1, eps=1e-12)
        kn = F.normalize(self.proj_k(k), dim=1, eps=1e-12)
        attn = torch.softmax(self.logit_scale * (qn @ kn.T), dim=1)
        return self.out(attn @ self.proj_v(v) + self.proj_skip(q))


class FrameFusion(nn.Module):
    """Two-frame fusion producing per-point features for the current frame.

    Pipeline: add positional embeddings to the encoder features, run
    per-frame self-attention, then cross-attend current-frame queries over
    previous-frame keys/values. A classification head maps the fusion
    feature to per-axis bin logits.
    """

    def __init__(
        self,
        feature_dim: int = 64,
        fusion_dim: int = 128,
        bins: int = 64,
        use_nocs_embedding: bool = True,
    ):
        super().__init__()
        self.bins = bins
        self.fusion_dim = fusion_dim
        self.embedding = PositionalEmbedding(dim=feature_dim, use_nocs=use_nocs_embedding)
        self.self_att1 = RelationAttention(feature_dim, feature_dim, (feature_dim,))
        self.self_att2 = RelationAttention(feature_dim, feature_dim, (feature_dim,))
        self.cross_att = RelationAttention(feature_dim, feature_dim, (feature_dim, fusion_dim, fusion_dim))
        self.nocs_head = mlp([fusion_dim, fusion_dim, 3 * bins])

    def forward(
        self,
        prev_xyz: torch.Tensor,
        prev_nocs: torch.Tensor | None,
        prev_feats: torch.Tensor,
        curr_xyz: torch.Tensor,
        curr_feats: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (fusion features N2 x D, logits N2 x 3 x bins)."""
        emb1, emb2 = self.embedding(prev_xyz, prev_nocs, curr_xyz)
        x1 = prev_feats + emb1
        x2 = curr_feats + emb2
        x1 = self.self_att1(x1, x1, x1)
        x2 = self.self_att2(x2, x2, x2)
        fused = self.cross_att(x2, x1, x1)
        logits = self.nocs_head(fused).view(len(curr_xyz), 3, self.bins)
        return fused, logits


def nocs_classification_loss(logits: torch.Tensor, gt_bins: torch.Tensor) -> torch.Tensor:
    """Cross-entropy against ground-truth bins, averaged over points and axes."""
    if logits.shape[:2] != gt_bins.shape:
        raise ValueError(f"misaligned logits {tuple(logits.shape)} vs bins {tuple(gt_bins.shape)}")
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), gt_bins.reshape(-1))
