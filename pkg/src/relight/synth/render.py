"""Lambertian renderer with exact intrinsic ground truth.

Camera and shading model:
  - fixed pinhole camera looking at the scene center, z up
  - directional light from (pan, tilt), hard shadows (one ray per pixel)
  - reflectance = albedo texture of the first visible surface
  - shading = [ambient + visibility * max(0, n.l)] * planckian_rgb(T), unclipped
  - image = clip(reflectance * shading, 0, 1), computed in float64 so the
    product identity is exact on the returned arrays
"""

from __future__ import annotations

import math

import numpy as np

from ..color import planckian_rgb
from ..core import LightCondition
from ..errors import RenderError
from . import backend
from .scene import LightSpec, SceneSpec, eval_texture

EYE = np.array([0.0, -3.2, 1.6])
LOOK_AT = np.array([0.0, 0.35, 0.3])
FOV_DEG = 48.0
SHADOW_BIAS = 1e-7


def camera_rays(height: int, width: int) -> np.ndarray:
    """Unit ray directions for every pixel of the fixed pinhole camera."""
    forward = LOOK_AT - EYE
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
    right = right / np.linalg.norm(right)
    up = np.cross(right, forward)

    tan_half = math.tan(math.radians(FOV_DEG) / 2.0)
    aspect = width / height
    xs = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * tan_half * aspect
    ys = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * tan_half
    dirs = forward[None, None, :] + xs[None, :, None] * right[None, None, :] + ys[:, None, None] * up[None, None, :]
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def _flatten_geometry(spec: SceneSpec):
    spheres = []
    boxes = []
    sphere_obj = []
    box_obj = []
    for idx, obj in enumerate(spec.objects):
        x, y, z = obj.position
        if obj.shape == "sphere":
            spheres.append([x, y, z, obj.size[0]])
            sphere_obj.append(idx)
        else:
            hx, hy, hz = obj.size
            boxes.append([x - hx, y - hy, z - hz, x + hx, y + hy, z + hz])
            box_obj.append(idx)
    spheres_arr = np.array(spheres, dtype=np.float64).reshape(-1, 4)
    boxes_arr = np.array(boxes, dtype=np.float64).reshape(-1, 6)
    return spheres_arr, boxes_arr, sphere_obj, box_obj


def light_direction(light: LightSpec) -> np.ndarray:
    """Unit vector pointing from the scene toward the light."""
    return LightCondition(pan=light.pan, tilt=light.tilt).direction()


def render_full(spec: SceneSpec, light: LightSpec, resolution) -> dict:
    """Render and return all intermediates (hit ids, normals, visibility...)."""
    if isinstance(resolution, int):
        height = width = resolution
    else:
        height, width = resolution
    if min(height, width) < 64:
        raise ValueError(f"resolution {height}x{width} below the 64-pixel minimum")

    dirs = camera_rays(height, width)
    spheres, boxes, sphere_obj, box_obj = _flatten_geometry(spec)
    ldir = light_direction(light)
    hit_id, point, normal, vis = backend.raycast(EYE, dirs, spheres, boxes, spec.wall_y, ldir, SHADOW_BIAS)

    if hit_id.min() < 0:
        raise RenderError(f"scene seed {spec.seed}: {(hit_id < 0).sum()} rays escaped the scene")

    reflectance = np.zeros((height, width, 3))
    for hid, tex in [(0, spec.floor_texture), (1, spec.wall_texture)] + [
        (2 + i, spec.objects[obj].texture) for i, obj in enumerate(sphere_obj)
    ] + [(2 + len(sphere_obj) + j, spec.objects[obj].texture) for j, obj in enumerate(box_obj)]:
        mask = hit_id == hid
        if mask.any():
            reflectance[mask] = eval_texture(tex, point[mask])

    ndotl = normal @ ldir
    scalar_shading = spec.ambient + vis * np.maximum(0.0, ndotl)
    light_rgb = planckian_rgb(light.temperature)
    shading = scalar_shading[:, :, None] * light_rgb[None, None, :]
    image = np.clip(reflectance * shading, 0.0, 1.0)
    return {
        "image": image,
        "reflectance": reflectance,
        "shading": shading,
        "scalar_shading": scalar_shading,
        "hit_id": hit_id,
        "point": point,
        "normal": normal,
        "visibility": vis,
        "light_rgb": light_rgb,
    }


def render(spec: SceneSpec, light: LightSpec, resolution) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render one view; returns float64 (image, reflectance, shading) HxWx3."""
    out = render_full(spec, light, resolution)
    return out["image"], out["reflectance"], out["shading"]
