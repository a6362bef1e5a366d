"""Training-pair sampling and cross-direction batch assembly.

A relighting pair is invertible: swapping input and target (and their lights)
yields another valid pair.  `assemble_cross_batch` exploits that by stacking
every sample together with its reversal along the batch dimension, doubling
the effective batch without touching the loader.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from ..core import ImageMap, RelightSample, SceneRecord
from ..errors import DataError


@dataclass
class Batch:
    """Stacked tensors for one step; when cross-doubled, item i+B0 reverses item i."""

    inputs: torch.Tensor  # B x 3 x H x W
    original_lights: torch.Tensor  # B x 7
    target_lights: torch.Tensor  # B x 7
    targets: torch.Tensor  # B x 3 x H x W
    gt_reflectance: Optional[torch.Tensor] = None
    gt_shading_ori: Optional[torch.Tensor] = None
    gt_shading_new: Optional[torch.Tensor] = None
    reversed_flag: Optional[torch.Tensor] = None  # B bool

    def __len__(self) -> int:
        return self.inputs.shape[0]


def sample_pair(scene: SceneRecord, rng: np.random.Generator) -> RelightSample:
    """Uniformly draw an ordered pair of distinct captures from one scene."""
    n = len(scene.captures)
    if n < 2:
        raise DataError(f"scene {scene.scene_id}: need at least 2 captures to sample a pair, got {n}")
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    src, dst = scene.captures[i], scene.captures[j]
    return RelightSample(
        input_image=src.image,
        original_light=src.light,
        target_light=dst.light,
        target_image=dst.image,
        gt_reflectance=src.reflectance,
        gt_shading_ori=src.shading,
        gt_shading_new=dst.shading,
    )


def reverse_sample(sample: RelightSample) -> RelightSample:
    """Swap the roles of input and target; an involution."""
    return RelightSample(
        input_image=sample.target_image,
        original_light=sample.target_light,
        target_light=sample.original_light,
        target_image=sample.input_image,
        gt_reflectance=sample.gt_reflectance,
        gt_shading_ori=sample.gt_shading_new,
        gt_shading_new=sample.gt_shading_ori,
    )


def _chw(m: ImageMap) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(m.data.transpose(2, 0, 1), dtype=np.float32))


def _light_vec(light) -> torch.Tensor:
    return torch.from_numpy(light.encode().astype(np.float32))


def _stack_maps(maps: Sequence[Optional[ImageMap]], what: str) -> Optional[torch.Tensor]:
    present = [m is not None for m in maps]
    if not any(present):
        return None
    if not all(present):
        raise DataError(f"mixed availability of {what} across batch samples")
    return torch.stack([_chw(m) for m in maps])


def assemble_cross_batch(samples: Sequence[RelightSample], include_reversed: bool = True) -> Batch:
    """Stack B0 samples (plus, by default, their reversals) into one batch."""
    if not samples:
        raise DataError("cannot assemble an empty batch")
    shape = samples[0].input_image.data.shape
    for s in samples:
        if s.input_image.data.shape != shape or s.target_image.data.shape != shape:
            raise DataError(f"inhomogeneous image sizes in batch: {s.input_image.data.shape} vs {shape}")
    ordered = list(samples)
    flags = [False] * len(samples)
    if include_reversed:
        ordered += [reverse_sample(s) for s in samples]
        flags += [True] * len(samples)
    return Batch(
        inputs=torch.stack([_chw(s.input_image) for s in ordered]),
        original_lights=torch.stack([_light_vec(s.original_light) for s in ordered]),
        target_lights=torch.stack([_light_vec(s.target_light) for s in ordered]),
        targets=torch.stack([_chw(s.target_image) for s in ordered]),
        gt_reflectance=_stack_maps([s.gt_reflectance for s in ordered], "reflectance"),
        gt_shading_ori=_stack_maps([s.gt_shading_ori for s in ordered], "original shading"),
        gt_shading_new=_stack_maps([s.gt_shading_new for s in ordered], "target shading"),
        reversed_flag=torch.tensor(flags, dtype=torch.bool),
    )
