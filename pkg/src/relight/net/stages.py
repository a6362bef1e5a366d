"""The two stages: intrinsic decomposition and shading manipulation.

Stage 1 maps an image to predicted reflectance and original shading.  Stage 2
maps the predicted shading plus a requested light to the new shading (and,
for the vector variant, a prediction of the original light).  Both share the
same encoder/decoder plan; the trunk between them is a residual stack or,
as an architectural ablation, a small U-net (which precludes the attention
blocks, so that combination is rejected at config time).
"""

from __future__ import annotations

import torch
from torch import nn

from .blocks import ConvBlock, NonLocalBlock, ResidualBlock, UpBlock
from .light import LightReplaceProbe, LightReplaceVector


class Encoder(nn.Module):
    """7x7 stride-1, then two 3x3 stride-2 conv blocks; downsamples x4."""

    def __init__(self, in_ch: int, base: int, bottleneck: int):
        super().__init__()
        self.body = nn.Sequential(
            ConvBlock(in_ch, base, 7, 1),
            ConvBlock(base, base * 2, 3, 2),
            ConvBlock(base * 2, bottleneck, 3, 2),
        )

    def forward(self, x):
        if x.shape[-1] % 4 or x.shape[-2] % 4:
            raise ValueError(f"spatial size {tuple(x.shape[-2:])} not divisible by 4")
        return self.body(x)


class Decoder(nn.Module):
    """Two transposed-conv blocks then a 7x7 conv with a range-forcing head."""

    def __init__(self, in_ch: int, base: int, out_ch: int, head: str):
        super().__init__()
        self.body = nn.Sequential(
            UpBlock(in_ch, base * 2),
            UpBlock(base * 2, base),
            nn.Conv2d(base, out_ch, 7, padding=3),
        )
        if head == "sigmoid":  # [0,1] for reflectance
            self.head = nn.Sigmoid()
        elif head == "softplus":  # [0,inf) for shading
            self.head = nn.Softplus()
        else:
            raise ValueError(f"unknown head {head!r}")

    def forward(self, x):
        return self.head(self.body(x))


class ResTrunk(nn.Module):
    """`blocks` residual blocks; optionally one attention block after block `attention_after`."""

    def __init__(self, channels: int, blocks: int, attention_after: int = 0):
        super().__init__()
        layers: list[nn.Module] = []
        for k in range(1, blocks + 1):
            layers.append(ResidualBlock(channels))
            if attention_after == k:
                layers.append(NonLocalBlock(channels))
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        return self.body(x)


class UNetTrunk(nn.Module):
    """Two-level U-net operating at the bottleneck resolution; shape preserving."""

    def __init__(self, channels: int, blocks: int = 0):
        super().__init__()
        mid = channels * 2
        self.down1 = ConvBlock(channels, mid, 3, 2)
        self.down2 = ConvBlock(mid, mid, 3, 2)
        self.up1 = UpBlock(mid, mid)
        self.merge1 = ConvBlock(mid * 2, mid, 3, 1)
        self.up2 = UpBlock(mid, channels)
        self.merge2 = ConvBlock(channels * 2, channels, 3, 1)

    def forward(self, x):
        d1 = self.down1(x)
        d2 = self.down2(d1)
        u1 = self.merge1(torch.cat([self.up1(d2), d1], dim=1))
        u2 = self.merge2(torch.cat([self.up2(u1), x], dim=1))
        return u2


def make_trunk(config, channels: int, blocks: int, attention_slot: int = 0) -> nn.Module:
    """Residual stack (with optional attention) or U-net, per config.backbone."""
    if config.backbone == "unet":
        return UNetTrunk(channels, blocks)
    attention_after = 0
    if config.use_nonlocal and attention_slot > 0:
        attention_after = min(attention_slot, max(blocks - 1, 1))
    return ResTrunk(channels, blocks, attention_after)


class Stage1(nn.Module):
    """image -> (reflectance_hat in [0,1], shading_ori_hat >= 0)."""

    def __init__(self, config):
        super().__init__()
        half = config.bottleneck_channels // 2
        self.encoder = Encoder(3, config.base_channels, config.bottleneck_channels)
        self.shared = make_trunk(config, config.bottleneck_channels, config.stage1_shared_blocks)
        self.reflectance_trunk = make_trunk(config, half, config.stage1_branch_blocks)
        self.shading_trunk = make_trunk(config, half, config.stage1_branch_blocks)
        self.reflectance_dec = Decoder(half, config.base_channels, 3, "sigmoid")
        self.shading_dec = Decoder(half, config.base_channels, 3, "softplus")
        self.half = half

    def forward(self, image):
        feat = self.shared(self.encoder(image))
        refl_feat, shad_feat = torch.split(feat, self.half, dim=1)
        reflectance = self.reflectance_dec(self.reflectance_trunk(refl_feat))
        shading = self.shading_dec(self.shading_trunk(shad_feat))
        return reflectance, shading

    def bottleneck(self, image):
        """Shared feature after the encoder; exposed for shape checks."""
        return self.encoder(image)


class Stage2(nn.Module):
    """(shading_ori_hat, new light) -> (shading_new_hat, light_ori_hat or None).

    Attention slots follow the residual layout: one block between the 3rd and
    4th pre-replacement residual blocks, one between the 1st and 2nd
    post-replacement blocks.
    """

    def __init__(self, config):
        super().__init__()
        bn = config.bottleneck_channels
        lc = config.light_feature_channels
        self.scene_channels = bn - lc
        self.light_channels = lc
        self.variant = config.light_variant
        self.encoder = Encoder(3, config.base_channels, bn)
        self.pre = make_trunk(config, bn, config.stage2_pre_blocks, attention_slot=3)
        self.post = make_trunk(config, bn, config.stage2_post_blocks, attention_slot=1)
        self.decoder = Decoder(bn, config.base_channels, 3, "softplus")
        if config.light_variant == "vector":
            self.replace = LightReplaceVector(lc, config.image_size // 4)
        else:
            self.replace = LightReplaceProbe(lc)

    def forward(self, shading_ori, target_light=None, probe=None):
        feat = self.pre(self.encoder(shading_ori))
        scene_feat, light_feat = torch.split(feat, [self.scene_channels, self.light_channels], dim=1)
        if self.variant == "vector":
            fused, light_ori = self.replace(scene_feat, light_feat, target_light)
        else:
            fused = self.replace(scene_feat, probe)
            light_ori = None
        shading_new = self.decoder(self.post(fused))
        return shading_new, light_ori
