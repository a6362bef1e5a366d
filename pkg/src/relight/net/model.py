"""Model configuration, the composed relighting network, and cost accounting."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import torch
from torch import nn

from ..errors import ConfigError, LightVariantError
from .blocks import NonLocalBlock
from .stages import Stage1, Stage2

BACKBONES = ("resnet", "unet")
LIGHT_VARIANTS = ("vector", "probe")


@dataclass(frozen=True)
class ModelConfig:
    """Every architectural switch in one place.

    `backbone` swaps the residual trunks for small U-nets; that variant has
    no slot for the attention blocks, so it requires use_nonlocal=False.
    `use_two_stage=False` feeds the image straight into the second stage and
    reads its output as the relit image.
    """

    base_channels: int = 64
    bottleneck_channels: int = 256
    stage1_shared_blocks: int = 4
    stage1_branch_blocks: int = 5
    stage2_pre_blocks: int = 4
    stage2_post_blocks: int = 5
    light_feature_channels: int = 32
    use_nonlocal: bool = True
    use_two_stage: bool = True
    light_variant: str = "vector"
    image_size: int = 256
    backbone: str = "resnet"

    def __post_init__(self):
        counts = (
            self.stage1_shared_blocks,
            self.stage1_branch_blocks,
            self.stage2_pre_blocks,
            self.stage2_post_blocks,
        )
        if any(c < 1 for c in counts):
            raise ConfigError(f"residual block counts must be >= 1, got {counts}")
        if self.light_feature_channels >= self.bottleneck_channels:
            raise ConfigError("light_feature_channels must be smaller than bottleneck_channels")
        if self.light_feature_channels < 1:
            raise ConfigError("light_feature_channels must be >= 1")
        if self.bottleneck_channels % 2:
            raise ConfigError("bottleneck_channels must be even (stage 1 splits it in half)")
        if self.image_size % 4:
            raise ConfigError(f"image_size {self.image_size} not divisible by 4")
        if self.light_variant not in LIGHT_VARIANTS:
            raise ConfigError(f"light_variant must be one of {LIGHT_VARIANTS}")
        if self.backbone not in BACKBONES:
            raise ConfigError(f"backbone must be one of {BACKBONES}")
        if self.backbone == "unet" and self.use_nonlocal:
            raise ConfigError("the unet backbone has no attention slots; set use_nonlocal=False")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown ModelConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class StageOutputs:
    """All network outputs for one forward pass.

    relit_hat = clip(reflectance_hat * shading_new_hat, 0, 1) and
    recon_hat = clip(reflectance_hat * shading_ori_hat, 0, 1); when the
    two-stage path is disabled the intrinsic fields are None and relit_hat is
    the (clipped) direct network output.
    """

    relit_hat: torch.Tensor
    reflectance_hat: Optional[torch.Tensor] = None
    shading_ori_hat: Optional[torch.Tensor] = None
    shading_new_hat: Optional[torch.Tensor] = None
    light_ori_hat: Optional[torch.Tensor] = None
    recon_hat: Optional[torch.Tensor] = None


class RelightModel(nn.Module):
    """Composed generator: Stage 1 decomposition, Stage 2 shading swap, products."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.stage1 = Stage1(config) if config.use_two_stage else None
        self.stage2 = Stage2(config)

    def _check_light_inputs(self, target_light, probe):
        if self.config.light_variant == "vector":
            if probe is not None:
                raise LightVariantError("model is configured for vector lights; got a probe pair")
            if target_light is None:
                raise LightVariantError("vector-light model needs target_light (Bx7)")
        else:
            if target_light is not None:
                raise LightVariantError("model is configured for probe lights; got a light vector")
            if probe is None:
                raise LightVariantError("probe-light model needs a Bx6xHxW probe pair")

    def forward(self, image, target_light=None, probe=None) -> StageOutputs:
        self._check_light_inputs(target_light, probe)
        if self.stage1 is not None:
            reflectance, shading_ori = self.stage1(image)
            shading_new, light_ori = self.stage2(shading_ori, target_light, probe)
            relit = torch.clamp(reflectance * shading_new, 0.0, 1.0)
            recon = torch.clamp(reflectance * shading_ori, 0.0, 1.0)
            return StageOutputs(
                relit_hat=relit,
                reflectance_hat=reflectance,
                shading_ori_hat=shading_ori,
                shading_new_hat=shading_new,
                light_ori_hat=light_ori,
                recon_hat=recon,
            )
        out, light_ori = self.stage2(image, target_light, probe)
        return StageOutputs(relit_hat=torch.clamp(out, 0.0, 1.0), shading_new_hat=out, light_ori_hat=light_ori)


def count_params_and_macs(model: nn.Module, image_size: int = 256) -> tuple[int, int]:
    """Trainable parameter count and multiply-accumulate estimate for one image.

    MACs are counted per conv/linear as out_elements x (in_channels/groups x
    kernel area), plus the attention products of each non-local block.
    """
    params = sum(p.numel() for p in model.parameters() if p.requires_grad)
    macs = 0
    hooks = []

    def conv_hook(mod, inputs, output):
        nonlocal macs
        kh, kw = mod.kernel_size
        macs += output.numel() * (mod.in_channels // mod.groups) * kh * kw

    def linear_hook(mod, inputs, output):
        nonlocal macs
        macs += output.numel() * mod.in_features

    for m in model.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            hooks.append(m.register_forward_hook(conv_hook))
        elif isinstance(m, nn.Linear):
            hooks.append(m.register_forward_hook(linear_hook))

    config = getattr(model, "config", None)
    was_training = model.training
    model.eval()
    with torch.no_grad():
        image = torch.zeros(1, 3, image_size, image_size)
        if config is not None and config.light_variant == "probe":
            model(image, probe=torch.zeros(1, 6, image_size // 4, image_size // 4))
        elif config is not None:
            model(image, target_light=torch.zeros(1, 7))
        else:
            model(image)
    model.train(was_training)
    for h in hooks:
        h.remove()
    for m in model.modules():
        if isinstance(m, NonLocalBlock):
            macs += m.last_attention_macs
    return params, macs
