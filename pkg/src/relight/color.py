"""Color science: Planckian locus, opponent transform, and gradient statistics.

The opponent transform and the forward-difference gradient magnitude defined
here are the reference (numpy) route; the loss suite re-implements the same
formulas on autograd tensors and is cross-checked against this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError

# Opponent color transform (per-pixel, linear):
#   O1 = (R - G) / sqrt(2)        red-green chromaticity
#   O2 = (R + G - 2B) / sqrt(6)   blue-yellow chromaticity
#   O3 = (R + G + B) / sqrt(3)    luminance
OPPONENT_MATRIX = np.array(
    [
        [1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0), 0.0],
        [1.0 / math.sqrt(6.0), 1.0 / math.sqrt(6.0), -2.0 / math.sqrt(6.0)],
        [1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0)],
    ]
)

# XYZ -> linear sRGB (IEC 61966-2-1), D65 white.
XYZ_TO_LINEAR_SRGB = np.array(
    [
        [3.2404542, -1.5371385, -0.4985314],
        [-0.9692660, 1.8760108, 0.0415560],
        [0.0556434, -0.2040259, 1.0572252],
    ]
)

TEMP_MIN_K = 1667.0
TEMP_MAX_K = 25000.0


def planckian_xy(temperature: float) -> tuple[float, float]:
    """CIE 1931 chromaticity of a blackbody via the cubic locus approximation."""
    t = float(temperature)
    if not (TEMP_MIN_K <= t <= TEMP_MAX_K):
        raise ValueError(f"temperature {t} K outside supported range [{TEMP_MIN_K:g}, {TEMP_MAX_K:g}]")
    u = 1e3 / t
    if t <= 4000.0:
        x = -0.2661239 * u**3 - 0.2343589 * u**2 + 0.8776956 * u + 0.179910
    else:
        x = -3.0258469 * u**3 + 2.1070379 * u**2 + 0.2226347 * u + 0.240390
    if t <= 2222.0:
        y = -1.1063814 * x**3 - 1.34811020 * x**2 + 2.18555832 * x - 0.20219683
    elif t <= 4000.0:
        y = -0.9549476 * x**3 - 1.37418593 * x**2 + 2.09137015 * x - 0.16748867
    else:
        y = 3.0817580 * x**3 - 5.87338670 * x**2 + 3.75112997 * x - 0.37001483
    return x, y


def planckian_rgb(temperature: float) -> np.ndarray:
    """Normalized linear-sRGB color of a blackbody at `temperature` kelvin.

    Negative out-of-gamut components are clipped and the result is scaled so
    the maximum channel equals 1.
    """
    x, y = planckian_xy(temperature)
    xyz = np.array([x / y, 1.0, (1.0 - x - y) / y])
    rgb = XYZ_TO_LINEAR_SRGB @ xyz
    rgb = np.clip(rgb, 0.0, None)
    peak = rgb.max()
    if peak <= 0.0:
        raise ValueError(f"degenerate blackbody color at T={temperature}")
    return rgb / peak


def rgb_to_opponent(img: np.ndarray) -> np.ndarray:
    """Map an ...x3 RGB array into opponent space (O1 red-green, O2 blue-yellow, O3 luminance)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.shape[-1] != 3:
        raise ValueError(f"expected trailing RGB axis of size 3, got shape {arr.shape}")
    return arr @ OPPONENT_MATRIX.T


def _forward_diff(arr: np.ndarray, axis: int) -> np.ndarray:
    """Forward differences with a one-sided (backward) difference on the far edge."""
    d = np.diff(arr, axis=axis)
    last = np.take(d, [-1], axis=axis)
    return np.concatenate([d, last], axis=axis)


def gradient_magnitude(img: np.ndarray, channels: str = "all") -> float:
    """Mean over pixels and selected channels of (|dx| + |dy|) / 2.

    `channels` selects "chroma" (leading two channels) or "all".  The input is
    an HxWxC array, typically already in opponent space.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError("gradient_magnitude needs at least 2 rows and columns")
    if channels == "chroma":
        arr = arr[:, :, :2]
    elif channels != "all":
        raise ValueError(f"unknown channel selector {channels!r}")
    gy = np.abs(_forward_diff(arr, axis=0))
    gx = np.abs(_forward_diff(arr, axis=1))
    return float(np.mean((gx + gy) / 2.0))


class _KahanMean:
    """Compensated running mean so aggregation order cannot shift results."""

    def __init__(self):
        self._sum = 0.0
        self._comp = 0.0
        self._n = 0

    def add(self, value: float):
        y = value - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t
        self._n += 1

    @property
    def mean(self) -> float:
        if self._n == 0:
            raise DataError("empty dataset: no items aggregated")
        return self._sum / self._n


@dataclass(frozen=True)
class GradientStats:
    """Dataset-mean opponent-space gradient magnitudes and their ratio rows."""

    grad_image_chroma: float
    grad_image_all: float
    grad_reflectance_chroma: float
    grad_reflectance_all: float
    grad_shading_chroma: float
    grad_shading_all: float

    @property
    def ratio_s_over_r_chroma(self) -> float:
        return self.grad_shading_chroma / self.grad_reflectance_chroma

    @property
    def ratio_s_over_r_all(self) -> float:
        return self.grad_shading_all / self.grad_reflectance_all

    @property
    def ratio_s_over_i_chroma(self) -> float:
        return self.grad_shading_chroma / self.grad_image_chroma

    @property
    def ratio_s_over_i_all(self) -> float:
        return self.grad_shading_all / self.grad_image_all

    def rows(self) -> list[tuple[str, float, float]]:
        """(label, chroma, all-channels) rows in display order."""
        return [
            ("grad I", self.grad_image_chroma, self.grad_image_all),
            ("grad R", self.grad_reflectance_chroma, self.grad_reflectance_all),
            ("grad S", self.grad_shading_chroma, self.grad_shading_all),
            ("grad S / grad R", self.ratio_s_over_r_chroma, self.ratio_s_over_r_all),
            ("grad S / grad I", self.ratio_s_over_i_chroma, self.ratio_s_over_i_all),
        ]

    def format_table(self) -> str:
        header = f"{'':<18}{'Chromaticity':>14}{'All channels':>14}"
        lines = [header, "-" * len(header)]
        for label, chroma, allc in self.rows():
            lines.append(f"{label:<18}{chroma:>14.4f}{allc:>14.4f}")
        return "\n".join(lines)


def chromaticity_stats(dataset: Iterable[tuple[np.ndarray, np.ndarray, np.ndarray]]) -> GradientStats:
    """Aggregate opponent-space gradient statistics over (image, reflectance, shading) triples.

    Ratio rows divide the aggregated means, not per-item ratios.  Raises
    DataError on an empty dataset.
    """
    acc = {key: _KahanMean() for key in ("ic", "ia", "rc", "ra", "sc", "sa")}
    for image, reflectance, shading in dataset:
        for prefix, arr in (("i", image), ("r", reflectance), ("s", shading)):
            opp = rgb_to_opponent(arr)
            acc[prefix + "c"].add(gradient_magnitude(opp, "chroma"))
            acc[prefix + "a"].add(gradient_magnitude(opp, "all"))
    return GradientStats(
        grad_image_chroma=acc["ic"].mean,
        grad_image_all=acc["ia"].mean,
        grad_reflectance_chroma=acc["rc"].mean,
        grad_reflectance_all=acc["ra"].mean,
        grad_shading_chroma=acc["sc"].mean,
        grad_shading_all=acc["sa"].mean,
    )


def iter_scene_triples(scenes) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Yield (image, reflectance, shading) arrays from SceneRecords that carry intrinsics."""
    for scene in scenes:
        for cap in scene.captures:
            if cap.reflectance is None or cap.shading is None:
                raise DataError(f"scene {scene.scene_id}: gradient statistics need reflectance and shading for every capture")
            yield cap.image.data, cap.reflectance.data, cap.shading.data
