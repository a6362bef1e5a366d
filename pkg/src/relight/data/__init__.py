"""Dataset persistence, configuration splits, pair sampling, and batch assembly."""

from .io import load_array, load_png, save_array, save_png
from .manifest import (
    SCHEMA_VERSION,
    CaptureEntry,
    Manifest,
    SceneEntry,
    check_manifest,
    read_manifest,
    split_by_configuration,
    to_scene_record,
    write_manifest,
)
from .sampling import Batch, assemble_cross_batch, sample_pair

__all__ = [
    "SCHEMA_VERSION",
    "Batch",
    "CaptureEntry",
    "Manifest",
    "SceneEntry",
    "assemble_cross_batch",
    "check_manifest",
    "load_array",
    "load_png",
    "read_manifest",
    "sample_pair",
    "save_array",
    "save_png",
    "split_by_configuration",
    "to_scene_record",
    "write_manifest",
]
