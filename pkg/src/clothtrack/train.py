"""Joint end-to-end training on consecutive frame pairs.

Teacher forcing: the previous-frame canonical coordinates fed to the
network are ground truth corrupted with the configured noise level, and
the canonical mesh is corrupted with a global scale, so the refiner learns
to undo exactly the corruption family it will see at inference.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import torch

from . import nocs as nocs_ops
from .config import RunConfig
from .geometry import SequenceDataset, sample_surface, interpolate_attribute
from .pipeline import TrackerModels, build_models, save_checkpoint
from .models.fusion import nocs_classification_loss
from .models.refiner import apply_mesh_refinement, mesh_l2_loss
from .models.warpfield import scatter_max_volume, warp_loss
from .tracker import _decode_logits, resample_points


class DivergenceError(RuntimeError):
    """Non-finite loss encountered during training."""


def pair_losses(
    models: TrackerModels,
    config: RunConfig,
    sequence: SequenceDataset,
    t: int,
    rng: np.random.Generator,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Losses for the (t-1, t) frame pair of one sequence."""
    dtype = next(models.encoder.parameters()).dtype
    prev_frame, curr_frame = sequence.frames[t - 1], sequence.frames[t]
    params = nocs_ops.NOISE_LEVELS[config.noise_level]

    sel_prev = resample_points(prev_frame.points, config.n_pc, rng)
    sel_curr = resample_points(curr_frame.points, config.n_pc, rng)
    prev_xyz = torch.as_tensor(prev_frame.points[sel_prev], dtype=dtype)
    curr_xyz = torch.as_tensor(curr_frame.points[sel_curr], dtype=dtype)

    prev_nocs = nocs_ops.perturb_nocs(prev_frame.gt_nocs[sel_prev], params, rng_seed=int(rng.integers(2**31)))
    prev_nocs = torch.as_tensor(prev_nocs, dtype=dtype)
    gt_bins = torch.as_tensor(nocs_ops.nocs_to_bins(curr_frame.gt_nocs[sel_curr], config.num_bins))

    mesh = sequence.canonical_mesh
    _, face_idx, bary = sample_surface(mesh.vertices, mesh.faces, config.n_mesh, rng)
    gt_mesh_pts = interpolate_attribute(mesh.vertices, mesh.faces, face_idx, bary)
    noisy_mesh_pts = nocs_ops.perturb_mesh_vertices(gt_mesh_pts, params.s_mesh, rng_seed=int(rng.integers(2**31)))
    gt_mesh_pts_t = torch.as_tensor(gt_mesh_pts, dtype=dtype)
    noisy_mesh_pts_t = torch.as_tensor(noisy_mesh_pts, dtype=dtype)

    prev_feats = models.encoder(prev_xyz)
    curr_feats = models.encoder(curr_xyz)
    fused, raw_logits = models.fusion(prev_xyz, prev_nocs, prev_feats, curr_xyz, curr_feats)
    loss_nocs = nocs_classification_loss(raw_logits, gt_bins)

    raw_nocs = _decode_logits(raw_logits.detach())
    refined_logits, scale, offset = models.refiner(raw_logits, fused, curr_xyz, raw_nocs, noisy_mesh_pts_t)
    loss_refine = nocs_classification_loss(refined_logits, gt_bins)
    refined_mesh_pts = apply_mesh_refinement(noisy_mesh_pts_t, scale, offset)
    loss_mesh = mesh_l2_loss(refined_mesh_pts, gt_mesh_pts_t)

    refined_nocs = _decode_logits(refined_logits.detach())
    volume, _ = scatter_max_volume(fused, refined_nocs, config.grid_size)
    dense = models.volume_unet(volume)
    # warp supervision: canonical surface samples -> their pose in frame t
    query = torch.as_tensor(np.clip(gt_mesh_pts, 0.0, 1.0), dtype=dtype)
    target = torch.as_tensor(
        interpolate_attribute(curr_frame.mesh_vertices_task, mesh.faces, face_idx, bary), dtype=dtype
    )
    loss_warp = warp_loss(models.warp_decoder(query, dense), target)

    return loss_nocs, loss_refine, loss_mesh, loss_warp


def train(
    config: RunConfig,
    sequences: list[SequenceDataset],
    out_dir: str | Path,
    models: TrackerModels | None = None,
    start_epoch: int = 0,
    log=print,
) -> Path:
    """Train all stages jointly; writes ``checkpoint.pt`` every epoch."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    if models is None:
        models = build_models(config)
    models.train()

    if config.optimizer != "adam":
        raise ValueError(f"unsupported optimizer {config.optimizer!r}")
    opt = torch.optim.Adam(models.parameters(), lr=config.learning_rate)

    pairs = [(si, t) for si, seq in enumerate(sequences) for t in range(1, len(seq))]
    if not pairs:
        raise ValueError("no training pairs")
    w = config.loss_weights
    ckpt_path = out_dir / "checkpoint.pt"

    for epoch in range(start_epoch, start_epoch + config.epochs):
        rng = np.random.default_rng((config.seed, epoch))
        order = rng.permutation(len(pairs))
        epoch_loss = 0.0
        t_start = time.perf_counter()
        for chunk_start in range(0, len(order), config.batch_size):
            chunk = order[chunk_start : chunk_start + config.batch_size]
            opt.zero_grad()
            total = 0.0
            for j in chunk:
                si, t = pairs[j]
                l1, l2, l3, l4 = pair_losses(models, config, sequences[si], t, rng)
                loss = (w[0] * l1 + w[1] * l2 + w[2] * l3 + w[3] * l4) / len(chunk)
                loss.backward()
                total += float(loss.detach())
            if not math.isfinite(total):
                raise DivergenceError(f"non-finite loss at epoch {epoch}: {total}")
            opt.step()
            epoch_loss += total
        save_checkpoint(ckpt_path, models, config, epoch + 1)
        log(
            f"epoch {epoch + 1}: loss {epoch_loss / max(1, len(order) // config.batch_size):.4f} "
            f"({time.perf_counter() - t_start:.1f}s)"
        )
    if not ckpt_path.exists():
        save_checkpoint(ckpt_path, models, config, start_epoch)
    return ckpt_path
