"""Handmade record builders shared across test modules."""

from __future__ import annotations

import numpy as np

from relight.core import (
    Capture,
    ImageMap,
    MapKind,
    RelightSample,
    SceneRecord,
    vector_light,
)


def random_intrinsics(rng: np.random.Generator, h: int = 16, w: int = 16):
    """Reflectance in (0,1), unclipped shading, and their clipped product."""
    refl = rng.uniform(0.05, 0.95, size=(h, w, 3))
    shad = rng.uniform(0.0, 2.0, size=(h, w, 3))
    img = np.clip(refl * shad, 0.0, 1.0)
    return img, refl, shad


def make_capture(rng: np.random.Generator, h: int = 16, w: int = 16, refl: np.ndarray | None = None) -> Capture:
    if refl is None:
        refl = rng.uniform(0.05, 0.95, size=(h, w, 3))
    shad = rng.uniform(0.0, 2.0, size=refl.shape)
    img = np.clip(refl * shad, 0.0, 1.0)
    light = vector_light(
        pan=rng.uniform(0.0, 2.0 * np.pi),
        tilt=rng.uniform(0.0, np.pi / 2.0),
        temperature=rng.uniform(2000.0, 10000.0),
    )
    return Capture(
        light=light,
        image=ImageMap(img, MapKind.IMAGE),
        reflectance=ImageMap(refl, MapKind.REFLECTANCE),
        shading=ImageMap(shad, MapKind.SHADING),
    )


def make_scene(rng: np.random.Generator, h: int = 16, w: int = 16, n_captures: int = 2, scene_id: str = "scene-0") -> SceneRecord:
    refl = rng.uniform(0.05, 0.95, size=(h, w, 3))
    captures = tuple(make_capture(rng, h, w, refl) for _ in range(n_captures))
    return SceneRecord(scene_id=scene_id, configuration_id=0, geometry_seed=7, captures=captures)


def make_sample(rng: np.random.Generator, h: int = 16, w: int = 16) -> RelightSample:
    scene = make_scene(rng, h, w, n_captures=2)
    a, b = scene.captures
    return RelightSample(
        input_image=a.image,
        original_light=a.light,
        target_light=b.light,
        target_image=b.image,
        gt_reflectance=a.reflectance,
        gt_shading_ori=a.shading,
        gt_shading_new=b.shading,
    )
