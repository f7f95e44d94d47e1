"""Model container and checkpoint round-trip."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch

from .config import RunConfig
from .models.encoder import PointFeatureEncoder
from .models.fusion import FrameFusion
from .models.refiner import NocsRefiner
from .models.warpfield import VolumeUNet, WarpDecoder

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class TrackerModels:
    encoder: PointFeatureEncoder
    fusion: FrameFusion
    refiner: NocsRefiner
    volume_unet: VolumeUNet
    warp_decoder: WarpDecoder

    def modules(self) -> dict[str, torch.nn.Module]:
        return {
            "encoder": self.encoder,
            "fusion": self.fusion,
            "refiner": self.refiner,
            "volume_unet": self.volume_unet,
            "warp_decoder": self.warp_decoder,
        }

    def parameters(self):
        for m in self.modules().values():
            yield from m.parameters()

    def train(self):
        for m in self.modules().values():
            m.train()

    def eval(self):
        for m in self.modules().values():
            m.eval()


def build_models(config: RunConfig) -> TrackerModels:
    # refiner widths shrink with channel_scale; encoder/fusion/volume dims
    # come straight from the config
    s = config.channel_scale
    enc = PointFeatureEncoder(
        feature_dim=config.encoder_dim,
        voxel_size=config.voxel_size,
        enc_channels=tuple(max(8, c // s) for c in (64, 64, 128, 256)),
        dec_channels=tuple(max(8, c // s) for c in (128, 64, 64)),
    )
    fusion = FrameFusion(
        feature_dim=config.encoder_dim,
        fusion_dim=config.fusion_dim,
        bins=config.num_bins,
        use_nocs_embedding=config.use_nocs_embedding,
    )
    refiner = NocsRefiner(fusion_dim=config.fusion_dim, bins=config.num_bins, channel_scale=s)
    unet = VolumeUNet(in_channels=config.fusion_dim, out_channels=config.volume_dim, base=max(8, config.volume_base // s))
    decoder = WarpDecoder(volume_channels=config.volume_dim)
    return TrackerModels(enc, fusion, refiner, unet, decoder)


def save_checkpoint(path: str | Path, models: TrackerModels, config: RunConfig, epoch: int):
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_json(),
        "epoch": int(epoch),
        "state": {name: m.state_dict() for name, m in models.modules().items()},
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[TrackerModels, RunConfig, int]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as e:
        raise CheckpointError(f"unreadable checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')!r}")
    config = RunConfig.from_json(payload["config"])
    models = build_models(config)
    for name, m in models.modules().items():
        m.load_state_dict(payload["state"][name])
    models.eval()
    return models, config, payload["epoch"]
