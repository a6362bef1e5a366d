"""Conditional patch discriminator for least-squares adversarial training.

Scores overlapping patches rather than whole images; the condition is the
input image, concatenated channelwise with the relit candidate (6 channels
total).  Real patches are trained toward 1, fakes toward 0, the generator
toward 1, all with squared error.
"""

from __future__ import annotations

import torch
from torch import nn


class PatchDiscriminator(nn.Module):
    def __init__(self, in_ch: int = 6, base: int = 64):
        super().__init__()

        def down(cin, cout, stride, norm=True):
            layers = [nn.Conv2d(cin, cout, 4, stride=stride, padding=1, bias=not norm)]
            if norm:
                layers.append(nn.BatchNorm2d(cout))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            return layers

        self.body = nn.Sequential(
            *down(in_ch, base, 2, norm=False),
            *down(base, base * 2, 2),
            *down(base * 2, base * 4, 2),
            *down(base * 4, base * 8, 1),
            nn.Conv2d(base * 8, 1, 4, stride=1, padding=1),
        )

    def forward(self, condition: torch.Tensor, candidate: torch.Tensor) -> torch.Tensor:
        return self.body(torch.cat([condition, candidate], dim=1))
