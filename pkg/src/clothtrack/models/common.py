"""Small shared building blocks for the network modules."""

from __future__ import annotations

import torch
import torch.nn as nn


def mlp(channels: list[int], final_activation: bool = False) -> nn.Sequential:
    """Per-point MLP: Linear layers with ReLU between them.

    The last layer is linear unless ``final_activation`` is set, so heads
    can be zero-initialized to an exact identity/constant.
    """
    layers: list[nn.Module] = []
    for i in range(len(channels) - 1):
        layers.append(nn.Linear(channels[i], channels[i + 1]))
        if i < len(channels) - 2 or final_activation:
            layers.append(nn.ReLU())
    return nn.Sequential(*layers)


def scale_widths(widths: list[int], scale: int, floor: int = 8) -> list[int]:
    """Divide hidden widths by ``scale``, keeping a minimum width."""
    return [max(floor, w // scale) for w in widths]


def zero_init_final(module: nn.Sequential):
    """Zero the last Linear layer so the head starts as an exact no-op."""
    last = [m for m in module if isinstance(m, nn.Linear)][-1]
    nn.init.zeros_(last.weight)
    nn.init.zeros_(last.bias)
