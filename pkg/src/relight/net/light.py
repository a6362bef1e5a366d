"""Light replacement: swap the illumination content of a bottleneck feature.

The bottleneck splits into a scene part and a narrow light part.  The light
part is collapsed to a 7-real prediction of the original light; the requested
new light (a 7-vector, or a probe image pair) is expanded to a feature map of
the same narrow width and concatenated back, leaving the output shaped
exactly like the module input.
"""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F

from ..errors import LightVariantError
from .blocks import ConvBlock, ResidualBlock

LIGHT_DIM = 7  # (sin pan, cos pan, sin tilt, cos tilt, R, G, B)


class LightVectorHead(nn.Module):
    """Collapse the light feature map to a 7-real light prediction."""

    def __init__(self, channels: int):
        super().__init__()
        self.convs = nn.Sequential(
            nn.Conv2d(channels, channels * 2, 3, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(channels * 2, channels * 2, 3, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.fc = nn.Linear(channels * 2, LIGHT_DIM)

    def forward(self, light_feat):
        h = self.convs(light_feat)
        h = F.adaptive_avg_pool2d(h, 1).flatten(1)
        return self.fc(h)


class LightExpander(nn.Module):
    """Expand a 7-real light vector to a channels x h x w feature map."""

    base = 8  # spatial size the fully connected seed reshapes to

    def __init__(self, channels: int, target_size: int):
        super().__init__()
        self.channels = channels
        self.fc = nn.Linear(LIGHT_DIM, channels * self.base * self.base)
        ups = max(math.ceil(math.log2(max(target_size, self.base) / self.base)), 0)
        layers = []
        for _ in range(ups):
            layers += [
                nn.ConvTranspose2d(channels, channels, 3, stride=2, padding=1, output_padding=1),
                nn.LeakyReLU(0.2, inplace=True),
            ]
        self.ups = nn.Sequential(*layers)

    def forward(self, light_vec, size):
        h, w = size
        seed = self.fc(light_vec).reshape(-1, self.channels, self.base, self.base)
        out = self.ups(seed)
        if out.shape[-2:] != (h, w):
            out = F.interpolate(out, size=(h, w), mode="bilinear", align_corners=False)
        return out


class LightReplaceVector(nn.Module):
    """(scene_feat, light_feat, new_light 7-vector) -> (fused_feat, light_ori_hat)."""

    def __init__(self, light_channels: int, target_size: int):
        super().__init__()
        self.head = LightVectorHead(light_channels)
        self.expander = LightExpander(light_channels, target_size)

    def forward(self, scene_feat, light_feat, new_light_vec):
        if new_light_vec is None or new_light_vec.dim() != 2 or new_light_vec.shape[1] != LIGHT_DIM:
            raise LightVariantError(f"vector light replacement needs a Bx{LIGHT_DIM} light vector")
        light_ori = self.head(light_feat)
        expanded = self.expander(new_light_vec, light_feat.shape[-2:])
        fused = torch.cat([scene_feat, expanded], dim=1)
        return fused, light_ori


class LightReplaceProbe(nn.Module):
    """(scene_feat, probe pair) -> fused_feat; no original-light prediction."""

    def __init__(self, light_channels: int):
        super().__init__()
        self.encode = nn.Sequential(
            ConvBlock(6, light_channels, 3),
            ResidualBlock(light_channels),
            ResidualBlock(light_channels),
        )

    def forward(self, scene_feat, probe_pair):
        if probe_pair is None or probe_pair.dim() != 4 or probe_pair.shape[1] != 6:
            raise LightVariantError("probe light replacement needs a Bx6xHxW chrome+gray pair")
        target = scene_feat.shape[-2:]
        if probe_pair.shape[-2:] != target:
            probe_pair = F.interpolate(probe_pair, size=target, mode="bilinear", align_corners=False)
        expanded = self.encode(probe_pair)
        return torch.cat([scene_feat, expanded], dim=1)
