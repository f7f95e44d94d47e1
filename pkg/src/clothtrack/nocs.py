"""Canonical (NOCS) coordinate math: binning, decoding, noise models.

All functions are pure and take explicit RNG seeds; coordinates live in the
unit cube and every public operation clamps its output back into [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NUM_BINS = 64


class InvalidInputError(ValueError):
    """Raised when an operation receives out-of-contract input."""


@dataclass(frozen=True)
class NoiseParams:
    """Scale/offset/jitter ranges for canonical-coordinate corruption.

    ``s_pc`` and ``o_pc`` apply to partial-cloud coordinates, ``s_mesh`` to
    the canonical mesh; ``delta`` is the per-component Gaussian std.
    """

    s_pc: tuple[float, float]
    o_pc: tuple[float, float]
    delta: float
    s_mesh: tuple[float, float]
    level: str = "1x"

    def __post_init__(self):
        if self.s_pc[1] < self.s_pc[0] or self.o_pc[1] < self.o_pc[0] or self.s_mesh[1] < self.s_mesh[0]:
            raise InvalidInputError("noise ranges must be non-empty")
        if self.delta < 0:
            raise InvalidInputError("delta must be >= 0")


# Robustness-experiment noise levels. Each range is sampled per axis.
NOISE_LEVELS = {
    "1x": NoiseParams(s_pc=(0.8, 1.2), o_pc=(0.0, 0.1), delta=0.05, s_mesh=(0.8, 1.2), level="1x"),
    "2x": NoiseParams(s_pc=(0.6, 1.4), o_pc=(0.0, 0.2), delta=0.10, s_mesh=(0.6, 1.4), level="2x"),
    "3x": NoiseParams(s_pc=(0.4, 1.6), o_pc=(0.0, 0.3), delta=0.15, s_mesh=(0.4, 1.6), level="3x"),
}


def _check_coords(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise InvalidInputError(f"expected N x 3 coordinates, got shape {coords.shape}")
    if not np.isfinite(coords).all():
        raise InvalidInputError("coordinates must be finite")
    return coords


def nocs_to_bins(coords: np.ndarray, bins: int = NUM_BINS) -> np.ndarray:
    """Quantize unit-cube coordinates into per-axis bin indices.

    coord 1.0 falls into the last bin (indices are min(floor(c*B), B-1)).
    """
    coords = _check_coords(coords)
    if bins < 2:
        raise InvalidInputError("bins must be >= 2")
    idx = np.floor(coords * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def bins_to_nocs(logits: np.ndarray) -> np.ndarray:
    """Decode N x 3 x B classification logits to bin-center coordinates.

    Argmax per axis with ties broken toward the lowest index, then the
    bin-center (i + 0.5) / B.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 3 or logits.shape[1] != 3:
        raise InvalidInputError(f"expected N x 3 x B logits, got shape {logits.shape}")
    if logits.shape[2] < 2:
        raise InvalidInputError("need at least 2 bins")
    if not np.isfinite(logits).all():
        raise InvalidInputError("logits must be finite")
    bins = logits.shape[2]
    idx = np.argmax(logits, axis=2)  # np.argmax already breaks ties low
    return (idx + 0.5) / bins


def one_hot_logits(bin_idx: np.ndarray, bins: int = NUM_BINS, scale: float = 1.0) -> np.ndarray:
    """N x 3 bin indices -> N x 3 x B one-hot logits (testing helper)."""
    bin_idx = np.asarray(bin_idx)
    out = np.zeros(bin_idx.shape + (bins,), dtype=np.float64)
    np.put_along_axis(out, bin_idx[..., None], scale, axis=-1)
    return out


def perturb_nocs(coords: np.ndarray, params: NoiseParams, rng_seed: int) -> np.ndarray:
    """Corrupt coordinates with a global per-axis scale + offset and jitter.

    out = clamp(coords * s + o + eps, 0, 1), s ~ U(s_pc) and o ~ U(o_pc)
    drawn once per axis, eps ~ N(0, delta^2) per component. Deterministic
    given the seed.
    """
    coords = _check_coords(coords)
    rng = np.random.default_rng(rng_seed)
    s = rng.uniform(params.s_pc[0], params.s_pc[1], size=3)
    o = rng.uniform(params.o_pc[0], params.o_pc[1], size=3)
    eps = rng.normal(0.0, params.delta, size=coords.shape) if params.delta > 0 else 0.0
    return np.clip(coords * s + o + eps, 0.0, 1.0)


def perturb_mesh_vertices(vertices: np.ndarray, s_mesh: tuple[float, float], rng_seed: int) -> np.ndarray:
    """Scale canonical mesh vertices about the cube center (0.5, 0.5, 0.5).

    One per-axis factor is drawn for the whole mesh; output is clamped.
    """
    vertices = _check_coords(vertices)
    rng = np.random.default_rng(rng_seed)
    s = rng.uniform(s_mesh[0], s_mesh[1], size=3)
    return np.clip(0.5 + (vertices - 0.5) * s, 0.0, 1.0)
