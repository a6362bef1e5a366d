"""Batch dataset generation: scenes x lights, with manifest."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..color import planckian_rgb
from ..data.io import save_array, save_png
from ..data.manifest import Manifest, CaptureEntry, SceneEntry, write_manifest
from ..errors import DataError
from .render import render
from .scene import sample_light, sample_scene


def generate_dataset(
    n_scenes: int,
    lights_per_scene: int = 10,
    out_dir=None,
    resolution: int = 256,
    seed: int = 0,
) -> Path:
    """Render `n_scenes` x `lights_per_scene` captures under `out_dir`.

    Deterministic in `seed`: re-running writes byte-identical files, manifest
    included.  Each scene is its own configuration (a synthetic scene has one
    physical arrangement), so configuration ids simply count scenes.
    Returns the manifest path.
    """
    if out_dir is None:
        raise DataError("generate_dataset needs an output directory")
    if n_scenes < 1 or lights_per_scene < 1:
        raise DataError(f"need at least 1 scene and 1 light, got {n_scenes}x{lights_per_scene}")
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    geometry_seeds = [int(v) for v in rng.integers(0, 2**31, size=n_scenes)]

    scenes = []
    try:
        for index in range(n_scenes):
            scene_id = f"scene_{index:04d}"
            spec = sample_scene(geometry_seeds[index])
            captures = []
            refl_rel = f"{scene_id}/reflectance.npy"
            for c in range(lights_per_scene):
                light = sample_light(rng)
                image, reflectance, shading = render(spec, light, resolution)
                if c == 0:
                    # identical for every capture of the scene; store once
                    save_array(out / refl_rel, reflectance)
                image_rel = f"{scene_id}/image_{c:02d}.npy"
                preview_rel = f"{scene_id}/image_{c:02d}.png"
                shading_rel = f"{scene_id}/shading_{c:02d}.npy"
                save_array(out / image_rel, image)
                save_png(out / preview_rel, image)
                save_array(out / shading_rel, shading)
                cond = CaptureEntry(
                    pan=light.pan,
                    tilt=light.tilt,
                    temperature=light.temperature,
                    color=tuple(planckian_rgb(light.temperature)),
                    radius=light.radius,
                    image_path=image_rel,
                    preview_path=preview_rel,
                    reflectance_path=refl_rel,
                    shading_path=shading_rel,
                )
                captures.append(cond)
            scenes.append(
                SceneEntry(
                    scene_id=scene_id,
                    configuration_id=index,
                    geometry_seed=geometry_seeds[index],
                    captures=tuple(captures),
                )
            )
    except OSError as e:
        raise DataError(f"dataset generation failed writing under {out}: {e}") from e

    manifest = Manifest(scenes=tuple(scenes), root=out)
    return write_manifest(manifest, out / "manifest.jsonl")
