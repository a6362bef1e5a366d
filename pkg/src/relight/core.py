"""Shared domain types: images, light conditions, scenes, and relight samples.

Types are immutable after construction (frozen dataclasses over read-only
numpy arrays) and carry no learning logic.  `validate` walks the documented
invariants and reports violations as strings instead of raising, so callers
can collect every problem in one pass.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
TILT_MAX = math.pi / 2.0

# Product-consistency tolerance for image ~ reflectance * shading, float domain.
INTRINSIC_TOL = 1e-5


class MapKind(enum.Enum):
    IMAGE = "image"
    REFLECTANCE = "reflectance"
    SHADING = "shading"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr)
    if out.ndim != 3 or out.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 array, got shape {out.shape}")
    if not np.issubdtype(out.dtype, np.floating):
        out = out.astype(np.float64)
    out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ImageMap:
    """H x W x 3 array of reals playing the role of an image, reflectance, or shading."""

    data: np.ndarray
    kind: MapKind = MapKind.IMAGE

    def __post_init__(self):
        object.__setattr__(self, "data", _freeze(self.data))
        if not isinstance(self.kind, MapKind):
            object.__setattr__(self, "kind", MapKind(self.kind))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def violations(self, name: str = "map") -> list[str]:
        v = []
        if self.height < 8 or self.width < 8:
            v.append(f"{name}: size rule: H and W must be >= 8, got {self.height}x{self.width}")
        if not np.all(np.isfinite(self.data)):
            v.append(f"{name}: finiteness rule: values must be finite")
            return v
        lo = float(self.data.min(initial=0.0))
        hi = float(self.data.max(initial=0.0))
        if self.kind in (MapKind.IMAGE, MapKind.REFLECTANCE):
            if lo < 0.0 or hi > 1.0:
                v.append(f"{name}: range rule: {self.kind.value} values must lie in [0,1], got [{lo:.6g},{hi:.6g}]")
        else:
            if lo < 0.0:
                v.append(f"{name}: range rule: shading values must be >= 0, got min {lo:.6g}")
        return v


class LightVariant(enum.Enum):
    VECTOR = "vector"
    PROBE = "probe"


@dataclass(frozen=True)
class LightCondition:
    """Explicit light description: pan/tilt/color (vector) or a sphere-probe pair."""

    variant: LightVariant = LightVariant.VECTOR
    pan: float = 0.0
    tilt: float = 0.0
    color: tuple[float, float, float] = (1.0, 1.0, 1.0)
    temperature: Optional[float] = None
    probe: Optional[tuple[ImageMap, ImageMap]] = None

    def __post_init__(self):
        if not isinstance(self.variant, LightVariant):
            object.__setattr__(self, "variant", LightVariant(self.variant))
        # Pan wraps; tilt clamps to the upper semisphere (no light below horizon).
        object.__setattr__(self, "pan", float(self.pan) % TWO_PI)
        object.__setattr__(self, "tilt", min(max(float(self.tilt), 0.0), TILT_MAX))
        object.__setattr__(self, "color", tuple(float(c) for c in self.color))

    def direction(self) -> np.ndarray:
        """Unit vector from the scene center toward the light (z up)."""
        cp, sp = math.cos(self.pan), math.sin(self.pan)
        ct, st = math.cos(self.tilt), math.sin(self.tilt)
        return np.array([ct * cp, ct * sp, st])

    def encode(self) -> np.ndarray:
        """7-real network encoding: (sin pan, cos pan, sin tilt, cos tilt, R, G, B).

        The sin/cos pairs avoid the wrap discontinuity at pan 0/2pi.
        """
        return np.array(
            [
                math.sin(self.pan),
                math.cos(self.pan),
                math.sin(self.tilt),
                math.cos(self.tilt),
                *self.color,
            ]
        )

    def violations(self, name: str = "light") -> list[str]:
        from .color import planckian_rgb  # local import to avoid a cycle

        v = []
        if self.variant is LightVariant.VECTOR:
            if self.probe is not None:
                v.append(f"{name}: variant rule: vector light must not carry a probe pair")
            c = np.asarray(self.color)
            if c.shape != (3,) or c.min() < 0.0 or c.max() > 1.0:
                v.append(f"{name}: color rule: RGB must lie in [0,1], got {self.color}")
            elif abs(c.max() - 1.0) > 1e-6:
                v.append(f"{name}: color rule: max channel must equal 1, got {c.max():.6g}")
            if self.temperature is not None:
                if not (1667.0 <= self.temperature <= 25000.0):
                    v.append(f"{name}: temperature rule: kelvin must lie in [1667,25000], got {self.temperature}")
                else:
                    expect = planckian_rgb(self.temperature)
                    if np.abs(expect - c).max() > 1e-6:
                        v.append(f"{name}: color rule: color must be the Planckian color of temperature {self.temperature}")
        else:
            if self.probe is None:
                v.append(f"{name}: variant rule: probe light must carry a (chrome, gray) probe pair")
        return v


def vector_light(pan: float, tilt: float, color=None, temperature: Optional[float] = None) -> LightCondition:
    """Build a vector light; when `temperature` is given the color is derived from it."""
    from .color import planckian_rgb

    if temperature is not None:
        rgb = planckian_rgb(temperature)
        return LightCondition(LightVariant.VECTOR, pan, tilt, tuple(rgb), temperature)
    if color is None:
        color = (1.0, 1.0, 1.0)
    c = np.asarray(color, dtype=np.float64)
    m = c.max()
    if m > 0:
        c = c / m
    return LightCondition(LightVariant.VECTOR, pan, tilt, tuple(float(x) for x in c))


def probe_light(chrome: ImageMap, gray: ImageMap) -> LightCondition:
    return LightCondition(LightVariant.PROBE, probe=(chrome, gray))


class Capture(NamedTuple):
    """One captured light condition of a scene, with optional intrinsic GT."""

    light: LightCondition
    image: ImageMap
    reflectance: Optional[ImageMap] = None
    shading: Optional[ImageMap] = None


@dataclass(frozen=True)
class SceneRecord:
    """One scene: identity plus N captures and their intrinsic components."""

    scene_id: str
    configuration_id: int
    geometry_seed: int
    captures: tuple[Capture, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "captures", tuple(self.captures))


@dataclass(frozen=True)
class RelightSample:
    """One training item: input image + target light -> target image."""

    input_image: ImageMap
    original_light: LightCondition
    target_light: LightCondition
    target_image: ImageMap
    gt_reflectance: Optional[ImageMap] = None
    gt_shading_ori: Optional[ImageMap] = None
    gt_shading_new: Optional[ImageMap] = None


def _product_violation(name: str, image: ImageMap, refl: ImageMap, shad: ImageMap) -> list[str]:
    if image.data.shape != refl.data.shape or image.data.shape != shad.data.shape:
        return [f"{name}: size rule: image and intrinsics must share HxW"]
    prod = np.clip(refl.data.astype(np.float64) * shad.data.astype(np.float64), 0.0, 1.0)
    err = float(np.abs(prod - image.data.astype(np.float64)).max())
    if err > INTRINSIC_TOL:
        return [f"{name}: intrinsic rule: max |image - reflectance*shading| = {err:.3g} exceeds {INTRINSIC_TOL:g}"]
    return []


def _validate_scene(scene: SceneRecord) -> list[str]:
    v: list[str] = []
    if not scene.captures:
        return [f"scene {scene.scene_id}: capture rule: at least one capture required"]
    base = scene.captures[0].image
    ref0 = None
    for i, cap in enumerate(scene.captures):
        name = f"scene {scene.scene_id} capture {i}"
        v += cap.image.violations(f"{name} image")
        v += cap.light.violations(f"{name} light")
        if cap.image.data.shape[:2] != base.data.shape[:2]:
            v.append(f"{name}: size rule: captures must share HxW, got {cap.image.data.shape[:2]} vs {base.data.shape[:2]}")
        if cap.reflectance is not None:
            v += cap.reflectance.violations(f"{name} reflectance")
            if ref0 is None:
                ref0 = cap.reflectance
            elif not np.array_equal(ref0.data, cap.reflectance.data):
                v.append(f"{name}: reflectance rule: reflectance must be identical across captures of one scene")
        if cap.reflectance is not None and cap.shading is not None:
            v += cap.shading.violations(f"{name} shading")
            v += _product_violation(name, cap.image, cap.reflectance, cap.shading)
    return v


def _validate_sample(s: RelightSample) -> list[str]:
    v: list[str] = []
    v += s.input_image.violations("sample input_image")
    v += s.target_image.violations("sample target_image")
    v += s.original_light.violations("sample original_light")
    v += s.target_light.violations("sample target_light")
    if s.input_image.data.shape != s.target_image.data.shape:
        v.append("sample: size rule: input and target images must share shape")
    if s.gt_reflectance is not None and s.gt_shading_ori is not None:
        v += _product_violation("sample input", s.input_image, s.gt_reflectance, s.gt_shading_ori)
    if s.gt_reflectance is not None and s.gt_shading_new is not None:
        v += _product_violation("sample target", s.target_image, s.gt_reflectance, s.gt_shading_new)
    return v


def validate(record) -> list[str]:
    """Return all invariant violations of a SceneRecord or RelightSample.

    Pure and deterministic; never raises, and returns [] iff every invariant holds.
    """
    if isinstance(record, SceneRecord):
        return _validate_scene(record)
    if isinstance(record, RelightSample):
        return _validate_sample(record)
    return [f"validate: unsupported record type {type(record).__name__}"]
