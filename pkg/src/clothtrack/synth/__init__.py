from .templates import make_template, CATEGORIES
from .sequences import generate_sequence, SCRIPTS
from .render import Camera, default_camera_rig, render_partial
from .dataset_io import (
    write_dataset,
    read_dataset,
    DatasetFormatError,
    DatasetVersionError,
)

__all__ = [
    "make_template",
    "CATEGORIES",
    "generate_sequence",
    "SCRIPTS",
    "Camera",
    "default_camera_rig",
    "render_partial",
    "write_dataset",
    "read_dataset",
    "DatasetFormatError",
    "DatasetVersionError",
]
