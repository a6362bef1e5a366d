"""Two-stage relighting network, light replacement modules, and patch discriminator."""

from .blocks import ConvBlock, NonLocalBlock, ResidualBlock, UpBlock
from .checkpoint import (
    CHECKPOINT_SCHEMA_VERSION,
    load_checkpoint,
    rng_restore,
    rng_snapshot,
    save_checkpoint,
)
from .discriminator import PatchDiscriminator
from .light import LightReplaceProbe, LightReplaceVector
from .model import ModelConfig, RelightModel, StageOutputs, count_params_and_macs
from .stages import Stage1, Stage2

__all__ = [
    "CHECKPOINT_SCHEMA_VERSION",
    "ConvBlock",
    "LightReplaceProbe",
    "LightReplaceVector",
    "ModelConfig",
    "NonLocalBlock",
    "PatchDiscriminator",
    "RelightModel",
    "ResidualBlock",
    "Stage1",
    "Stage2",
    "StageOutputs",
    "UpBlock",
    "count_params_and_macs",
    "load_checkpoint",
    "rng_restore",
    "rng_snapshot",
    "save_checkpoint",
]
