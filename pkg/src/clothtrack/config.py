"""Run configuration: one flat, JSON-serializable record of every knob."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict, fields
from pathlib import Path


class ConfigError(ValueError):
    """Unknown key, bad type, or out-of-range value in a config."""


@dataclass
class RunConfig:
    # data
    category: str = "Shirt"
    scripts: tuple[str, ...] = ("fold_lr",)
    n_pc: int = 4000  # partial-cloud resample count
    n_mesh: int = 6000  # canonical-mesh surface sample count
    noise_level: str = "1x"
    garment_size: float = 0.5  # meters
    template_resolution: int = 16
    sequences_per_instance: int = 1
    frames_per_sequence: int = 20
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    # model
    num_bins: int = 64
    encoder_dim: int = 64
    fusion_dim: int = 128
    voxel_size: float = 0.01
    grid_size: int = 32
    volume_dim: int = 64
    volume_base: int = 32
    channel_scale: int = 4  # divides refiner MLP widths (1 = full width)
    use_nocs_embedding: bool = True
    use_pc_refiner: bool = True
    use_mesh_refiner: bool = True

    # training
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    batch_size: int = 16
    epochs: int = 30
    loss_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    # tracking
    mesh_refine_budget: int = 1  # frames; 15 suits flattening-style scripts
    static_motion_threshold: float = 0.001  # m mean vertex displacement

    seed: int = 0

    def __post_init__(self):
        if self.n_pc < 1 or self.n_mesh < 1:
            raise ConfigError("sample counts must be positive")
        if self.num_bins < 2:
            raise ConfigError("num_bins must be >= 2")
        if self.noise_level not in ("1x", "2x", "3x"):
            raise ConfigError(f"unknown noise level {self.noise_level!r}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("bad training parameters")
        if self.channel_scale < 1:
            raise ConfigError("channel_scale must be >= 1")
        if len(self.loss_weights) != 4:
            raise ConfigError("loss_weights needs 4 entries")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError("split_ratios must be 3 fractions summing to 1")

    def to_json(self) -> str:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed config JSON: {e}") from e
        known = {f.name for f in fields(RunConfig)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for f in fields(RunConfig):
            if f.name in d and isinstance(getattr(RunConfig, f.name, None), tuple):
                d[f.name] = tuple(d[f.name])
        # tuples serialize as lists; convert back for all tuple-typed fields
        for name in ("scripts", "split_ratios", "loss_weights"):
            if name in d and isinstance(d[name], list):
                d[name] = tuple(d[name])
        return RunConfig(**d)

    def save(self, path: str | Path):
        Path(path).write_text(self.to_json())

    @staticmethod
    def load(path: str | Path) -> "RunConfig":
        return RunConfig.from_json(Path(path).read_text())
