"""Scene and light sampling plus procedural 3D textures.

Scenes are desk-scale: a floor plane at z=0, a back wall, and 3 to 10
non-overlapping spheres and axis-aligned boxes resting on the floor.  All
randomness flows through numpy Generators seeded from explicit integers, so
every artifact is reproducible from its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..errors import RenderError

TEXTURE_KINDS = ("constant", "checker", "stripes", "noise")

# Object footprints are sampled inside this floor rectangle (x, y bounds).
FLOOR_X = (-1.05, 1.05)
FLOOR_Y = (-0.75, 1.05)
WALL_Y = 1.6
PLACEMENT_MARGIN = 0.02

_H1 = np.uint64(0x9E3779B97F4A7C15)
_H2 = np.uint64(0xBF58476D1CE4E5B9)
_H3 = np.uint64(0x94D049BB133111EB)
_PX = np.uint64(0x8DA6B343)
_PY = np.uint64(0xD8163841)
_PZ = np.uint64(0xCB1AB31F)


@dataclass(frozen=True)
class TextureSpec:
    """Procedural 3D texture evaluated at surface points (world space)."""

    kind: str = "constant"
    color_a: tuple[float, float, float] = (0.5, 0.5, 0.5)
    color_b: tuple[float, float, float] = (0.5, 0.5, 0.5)
    scale: float = 0.3
    axis: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TEXTURE_KINDS:
            raise ValueError(f"unknown texture kind {self.kind!r}")
        if not (0 <= self.axis <= 2):
            raise ValueError("texture axis must be 0, 1 or 2")
        if self.scale <= 0:
            raise ValueError("texture scale must be positive")


@dataclass(frozen=True)
class ObjectSpec:
    """One solid: a sphere (size=(radius,)) or an axis-aligned box (size=half extents)."""

    shape: str
    position: tuple[float, float, float]
    size: tuple[float, ...]
    texture: TextureSpec

    def __post_init__(self):
        if self.shape not in ("sphere", "box"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.shape == "sphere" and len(self.size) != 1:
            raise ValueError("sphere size is (radius,)")
        if self.shape == "box" and len(self.size) != 3:
            raise ValueError("box size is (hx, hy, hz) half extents")

    def footprint_radius(self) -> float:
        if self.shape == "sphere":
            return self.size[0]
        hx, hy, _ = self.size
        return float(np.hypot(hx, hy))


@dataclass(frozen=True)
class SceneSpec:
    """Full geometric description of one scene; light-independent."""

    seed: int
    objects: tuple[ObjectSpec, ...]
    floor_texture: TextureSpec
    wall_texture: TextureSpec
    wall_y: float = WALL_Y
    ambient: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if not (0.02 <= self.ambient <= 0.1):
            raise ValueError(f"ambient {self.ambient} outside [0.02, 0.1]")


@dataclass(frozen=True)
class LightSpec:
    """Directional light pointing at the scene center from (pan, tilt).

    `radius` is carried as metadata only: shading treats the light as
    directional, with no distance falloff.
    """

    pan: float
    tilt: float
    temperature: float
    radius: float = 3.0


def overlaps(a: ObjectSpec, b: ObjectSpec, margin: float = PLACEMENT_MARGIN) -> bool:
    """Conservative bounding-circle overlap test on floor footprints."""
    dx = a.position[0] - b.position[0]
    dy = a.position[1] - b.position[1]
    return float(np.hypot(dx, dy)) < a.footprint_radius() + b.footprint_radius() + margin


def check_scene_spec(spec: SceneSpec) -> list[str]:
    """Invariant check: object count, pairwise separation, color ranges."""
    v = []
    if not (3 <= len(spec.objects) <= 10):
        v.append(f"object count {len(spec.objects)} outside [3, 10]")
    for i, a in enumerate(spec.objects):
        for b in spec.objects[i + 1 :]:
            if overlaps(a, b, margin=0.0):
                v.append(f"objects at {a.position} and {b.position} overlap")
    for tex in [spec.floor_texture, spec.wall_texture] + [o.texture for o in spec.objects]:
        for c in (tex.color_a, tex.color_b):
            if min(c) < 0.0 or max(c) > 1.0:
                v.append(f"texture color {c} outside [0,1]")
    return v


def _sample_texture(rng: np.random.Generator, kinds=TEXTURE_KINDS) -> TextureSpec:
    kind = str(rng.choice(kinds))
    color_a = tuple(rng.uniform(0.08, 0.95, 3).tolist())
    color_b = tuple(rng.uniform(0.08, 0.95, 3).tolist())
    return TextureSpec(
        kind=kind,
        color_a=color_a,
        color_b=color_b,
        scale=float(rng.uniform(0.12, 0.45)),
        axis=int(rng.integers(0, 3)),
        seed=int(rng.integers(0, 2**31)),
    )


def sample_scene(seed: int, max_retries: int = 500) -> SceneSpec:
    """Draw a random non-overlapping scene, deterministically from `seed`."""
    rng = np.random.default_rng(seed)
    count = int(rng.integers(3, 11))
    placed: list[ObjectSpec] = []
    for _ in range(count):
        for attempt in range(max_retries + 1):
            if attempt == max_retries:
                raise RenderError(f"scene seed {seed}: failed to place object {len(placed) + 1}/{count} after {max_retries} tries")
            shape = "sphere" if rng.uniform() < 0.5 else "box"
            x = float(rng.uniform(*FLOOR_X))
            y = float(rng.uniform(*FLOOR_Y))
            if shape == "sphere":
                r = float(rng.uniform(0.09, 0.18))
                cand = ObjectSpec("sphere", (x, y, r), (r,), _sample_texture(rng))
            else:
                hx = float(rng.uniform(0.08, 0.16))
                hy = float(rng.uniform(0.08, 0.16))
                hz = float(rng.uniform(0.08, 0.2))
                cand = ObjectSpec("box", (x, y, hz), (hx, hy, hz), _sample_texture(rng))
            if all(not overlaps(cand, other) for other in placed):
                placed.append(cand)
                break
    # Large-scale texture on the backdrop keeps reflectance edges visible there.
    floor_tex = replace(_sample_texture(rng, ("checker", "stripes", "noise")), scale=float(rng.uniform(0.25, 0.6)))
    wall_tex = replace(_sample_texture(rng), scale=float(rng.uniform(0.3, 0.7)))
    ambient = float(rng.uniform(0.02, 0.1))
    return SceneSpec(seed=seed, objects=tuple(placed), floor_texture=floor_tex, wall_texture=wall_tex, ambient=ambient)


def sample_light(rng: np.random.Generator) -> LightSpec:
    """Uniform upper-hemisphere light with a Planckian color temperature."""
    return LightSpec(
        pan=float(rng.uniform(0.0, 2.0 * np.pi)),
        tilt=float(rng.uniform(0.2, 1.45)),
        temperature=float(rng.uniform(2500.0, 9500.0)),
        radius=float(rng.uniform(2.0, 4.0)),
    )


def _splitmix(u: np.ndarray) -> np.ndarray:
    z = u + _H1
    z = (z ^ (z >> np.uint64(30))) * _H2
    z = (z ^ (z >> np.uint64(27))) * _H3
    return z ^ (z >> np.uint64(31))


def _lattice_value(ix: np.ndarray, iy: np.ndarray, iz: np.ndarray, seed: int) -> np.ndarray:
    u = (
        ix.astype(np.uint64) * _PX
        ^ iy.astype(np.uint64) * _PY
        ^ iz.astype(np.uint64) * _PZ
        ^ np.uint64(seed)
    )
    return _splitmix(u).astype(np.float64) / float(2**64)


def _value_noise(pts: np.ndarray, scale: float, seed: int) -> np.ndarray:
    """Trilinear value noise in [0,1] over a hashed integer lattice."""
    q = pts / scale
    i0 = np.floor(q).astype(np.int64)
    f = q - i0
    w = f * f * (3.0 - 2.0 * f)
    out = np.zeros(pts.shape[:-1])
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                corner = _lattice_value(i0[..., 0] + dx, i0[..., 1] + dy, i0[..., 2] + dz, seed)
                wx = w[..., 0] if dx else 1.0 - w[..., 0]
                wy = w[..., 1] if dy else 1.0 - w[..., 1]
                wz = w[..., 2] if dz else 1.0 - w[..., 2]
                out += corner * wx * wy * wz
    return out


def eval_texture(tex: TextureSpec, pts: np.ndarray) -> np.ndarray:
    """Evaluate a texture at ...x3 world points; returns ...x3 colors in [0,1]."""
    pts = np.asarray(pts, dtype=np.float64)
    a = np.asarray(tex.color_a)
    b = np.asarray(tex.color_b)
    if tex.kind == "constant":
        return np.broadcast_to(a, pts.shape).copy()
    if tex.kind == "checker":
        cell = np.floor(pts / tex.scale).astype(np.int64).sum(axis=-1)
        return np.where((cell % 2 == 0)[..., None], a, b)
    if tex.kind == "stripes":
        band = np.floor(pts[..., tex.axis] / tex.scale).astype(np.int64)
        return np.where((band % 2 == 0)[..., None], a, b)
    v = _value_noise(pts, tex.scale, tex.seed)[..., None]
    return a + (b - a) * v
