"""Image-quality metrics and split evaluation tables.

PSNR and MPS are plain formulas; SSIM and the perceptual distance are
borrowed from the loss module so training and evaluation cannot drift
apart.  ``evaluate`` walks every ordered capture pair of a split and
produces per-pair rows plus an aggregate row, the same shape as the
result tables the numbers are usually compared against.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .core import ImageMap, SceneRecord
from .data import Manifest, to_scene_record
from .errors import ConfigError
from .losses import default_perceptual_provider, perceptual_distance, ssim

__all__ = [
    "EVAL_RESOLUTION",
    "EvalRow",
    "EvalTable",
    "evaluate",
    "mps",
    "psnr",
]

# Matches the resolution every published number is computed at; SSIM in
# particular is resolution-sensitive, so comparisons at other sizes are
# not apples-to-apples.
EVAL_RESOLUTION = 256

PSNR_CAP_DB = 100.0


def _as_float64(x) -> np.ndarray:
    if isinstance(x, ImageMap):
        x = x.data
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def psnr(x, y) -> float:
    """Peak signal-to-noise ratio in dB for images on [0, 1].

    Identical (or numerically indistinguishable) inputs are capped at
    100 dB instead of diverging.
    """
    a = _as_float64(x)
    b = _as_float64(y)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def mps(ssim_score: float, lpips_score: float) -> float:
    """Mean perceptual score: 0.5 * (ssim + (1 - lpips))."""
    return 0.5 * (float(ssim_score) + (1.0 - float(lpips_score)))


@dataclass(frozen=True)
class EvalRow:
    """Metrics for one ordered (source capture, target capture) pair."""

    scene_id: str
    source: int
    target: int
    mps: float
    ssim: float
    lpips: float
    psnr: float


@dataclass(frozen=True)
class EvalTable:
    rows: tuple[EvalRow, ...]
    provider: str
    resolution: int

    def _mean(self, field: str) -> float:
        # fsum keeps the aggregate independent of row order.
        return math.fsum(getattr(r, field) for r in self.rows) / len(self.rows)

    @property
    def mean_mps(self) -> float:
        return self._mean("mps")

    @property
    def mean_ssim(self) -> float:
        return self._mean("ssim")

    @property
    def mean_lpips(self) -> float:
        return self._mean("lpips")

    @property
    def mean_psnr(self) -> float:
        return self._mean("psnr")

    def to_records(self) -> list[dict]:
        """Machine-readable rows; the aggregate comes last as scene 'mean'."""
        out = [dataclasses.asdict(r) for r in self.rows]
        out.append(
            {
                "scene_id": "mean",
                "source": -1,
                "target": -1,
                "mps": self.mean_mps,
                "ssim": self.mean_ssim,
                "lpips": self.mean_lpips,
                "psnr": self.mean_psnr,
            }
        )
        return out

    def format_table(self) -> str:
        width = max([len("scene")] + [len(r.scene_id) for r in self.rows])
        header = f"{'scene':<{width}}  pair   MPS ↑   SSIM ↑  LPIPS ↓  PSNR ↑"
        lines = [header]
        for r in self.rows:
            lines.append(
                f"{r.scene_id:<{width}}  {r.source}→{r.target}   "
                f"{r.mps:6.4f}  {r.ssim:6.4f}   {r.lpips:6.4f}  {r.psnr:6.2f}"
            )
        lines.append(
            f"{'mean':<{width}}  all   "
            f"{self.mean_mps:6.4f}  {self.mean_ssim:6.4f}   "
            f"{self.mean_lpips:6.4f}  {self.mean_psnr:6.2f}"
        )
        lines.append(f"perceptual provider: {self.provider}  (evaluated at {self.resolution}x{self.resolution})")
        return "\n".join(lines)


def _as_scenes(dataset) -> list[SceneRecord]:
    if isinstance(dataset, Manifest):
        return [to_scene_record(dataset, scene) for scene in dataset.scenes]
    return list(dataset)


def _to_tensor(image: ImageMap, resolution: int) -> torch.Tensor:
    t = torch.from_numpy(np.array(image.data, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)
    if t.shape[-2:] != (resolution, resolution):
        t = F.interpolate(t, size=(resolution, resolution), mode="bilinear", align_corners=False, antialias=True)
    return t.clamp(0.0, 1.0)


def evaluate(
    model,
    dataset,
    provider=None,
    resolution: int = EVAL_RESOLUTION,
    max_pairs: Optional[int] = None,
    seed: int = 0,
) -> EvalTable:
    """Score ``model`` on every ordered capture pair of ``dataset``.

    ``dataset`` is a Manifest or an iterable of SceneRecords.  Each pair
    feeds capture ``i`` plus capture ``j``'s light to the model and
    compares the relit prediction against capture ``j``.  ``max_pairs``
    draws a seeded subsample instead of the full cross product; reruns
    with the same seed score the same pairs.
    """
    config = getattr(model, "config", None)
    if config is not None and getattr(config, "light_variant", "vector") != "vector":
        raise ConfigError("evaluation drives the model with light vectors; probe-light models are not supported")
    if resolution < 8 or resolution % 4 != 0:
        raise ConfigError("resolution must be >= 8 and divisible by 4")
    if max_pairs is not None and max_pairs < 1:
        raise ConfigError("max_pairs must be at least 1")

    scenes = _as_scenes(dataset)
    pairs = [
        (scene, i, j)
        for scene in scenes
        for i in range(len(scene.captures))
        for j in range(len(scene.captures))
        if i != j
    ]
    if not pairs:
        raise ConfigError("dataset has no capture pairs to evaluate")
    if max_pairs is not None and max_pairs < len(pairs):
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(pairs), size=max_pairs, replace=False))
        pairs = [pairs[int(k)] for k in keep]

    provider = provider or default_perceptual_provider()
    provider_name = getattr(provider, "name", type(provider).__name__)

    was_training = getattr(model, "training", False)
    if hasattr(model, "eval"):
        model.eval()
    rows = []
    with torch.no_grad():
        for scene, i, j in pairs:
            src = scene.captures[i]
            tgt = scene.captures[j]
            image = _to_tensor(src.image, resolution)
            light = torch.as_tensor(tgt.light.encode(), dtype=image.dtype).unsqueeze(0)
            outputs = model(image, target_light=light)
            relit = outputs.relit_hat.clamp(0.0, 1.0)
            gt = _to_tensor(tgt.image, resolution)
            s = float(ssim(relit, gt))
            d = float(perceptual_distance(relit, gt, provider))
            rows.append(
                EvalRow(
                    scene_id=scene.scene_id,
                    source=i,
                    target=j,
                    mps=mps(s, d),
                    ssim=s,
                    lpips=d,
                    psnr=psnr(relit, gt),
                )
            )
    if was_training and hasattr(model, "train"):
        model.train()
    return EvalTable(rows=tuple(rows), provider=provider_name, resolution=resolution)
