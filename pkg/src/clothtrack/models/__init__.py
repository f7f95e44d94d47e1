from .encoder import PointFeatureEncoder
from .fusion import PositionalEmbedding, RelationAttention, FrameFusion, nocs_classification_loss
from .refiner import NocsRefiner, refiner_losses
from .warpfield import scatter_max_volume, VolumeUNet, WarpDecoder, warp_loss

__all__ = [
    "PointFeatureEncoder",
    "PositionalEmbedding",
    "RelationAttention",
    "FrameFusion",
    "nocs_classification_loss",
    "NocsRefiner",
    "refiner_losses",
    "scatter_max_volume",
    "VolumeUNet",
    "WarpDecoder",
    "warp_loss",
]
