"""Reusable layers: conv blocks, residual blocks, and spatial self-attention."""

from __future__ import annotations

import torch
from torch import nn


class ConvBlock(nn.Module):
    """Convolution-BatchNorm-ReLU."""

    def __init__(self, cin: int, cout: int, kernel: int, stride: int = 1):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(cin, cout, kernel, stride=stride, padding=kernel // 2, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.body(x)


class UpBlock(nn.Module):
    """Transposed-convolution upsampler (x2) with BatchNorm and ReLU."""

    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.ConvTranspose2d(cin, cout, 3, stride=2, padding=1, output_padding=1, bias=False),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.body(x)


class ResidualBlock(nn.Module):
    """Two 3x3 convs with BatchNorm, identity skip, no activation after the sum."""

    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, padding=1, bias=False),
            nn.BatchNorm2d(channels),
        )

    def forward(self, x):
        return x + self.body(x)


class NonLocalBlock(nn.Module):
    """Embedded-Gaussian self-attention over all spatial positions, residual.

    The output projection starts at zero, so a freshly built block is the
    identity map; it has no positional terms, so permuting spatial positions
    permutes the output the same way.
    """

    def __init__(self, channels: int):
        super().__init__()
        inner = max(channels // 2, 1)
        self.inner = inner
        self.theta = nn.Conv2d(channels, inner, 1)
        self.phi = nn.Conv2d(channels, inner, 1)
        self.g = nn.Conv2d(channels, inner, 1)
        self.out = nn.Conv2d(inner, channels, 1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)
        self.last_attention_macs = 0

    def forward(self, x):
        b, c, h, w = x.shape
        n = h * w
        theta = self.theta(x).reshape(b, self.inner, n).transpose(1, 2)  # B x N x C'
        phi = self.phi(x).reshape(b, self.inner, n)  # B x C' x N
        g = self.g(x).reshape(b, self.inner, n).transpose(1, 2)  # B x N x C'
        attention = torch.softmax(theta @ phi, dim=-1)  # B x N x N
        y = (attention @ g).transpose(1, 2).reshape(b, self.inner, h, w)
        self.last_attention_macs = 2 * b * n * n * self.inner
        return x + self.out(y)
