"""Category-level garment pose tracking on partial point-cloud sequences."""

from .config import RunConfig
from .geometry import CanonicalMesh, PointCloudFrame, SequenceDataset

__all__ = ["RunConfig", "CanonicalMesh", "PointCloudFrame", "SequenceDataset"]

__version__ = "0.1.0"
