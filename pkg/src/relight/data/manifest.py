"""Line-delimited JSON dataset manifest.

Layout: line 1 is a header object carrying `schema_version`; every further
line is one scene entry.  Keys are sorted and no timestamps are written, so
regenerating a dataset from the same seed produces a byte-identical file.

The schema name records the shading convention: lights are directional with
no distance falloff (the stored light radius is descriptive metadata only).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..core import Capture, ImageMap, LightCondition, MapKind, SceneRecord
from ..errors import ConfigError, DataError, SchemaVersionError
from .io import load_array

SCHEMA_VERSION = "relight-dataset/1-directional-nofalloff"


@dataclass(frozen=True)
class CaptureEntry:
    """One light condition of a scene and the files it was rendered to."""

    pan: float
    tilt: float
    temperature: float
    color: tuple[float, float, float]
    radius: float
    image_path: str
    preview_path: Optional[str] = None
    reflectance_path: Optional[str] = None
    shading_path: Optional[str] = None

    def light(self) -> LightCondition:
        return LightCondition(
            pan=self.pan, tilt=self.tilt, color=self.color, temperature=self.temperature
        )


@dataclass(frozen=True)
class SceneEntry:
    scene_id: str
    configuration_id: int
    geometry_seed: int
    captures: tuple[CaptureEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "captures", tuple(self.captures))


@dataclass(frozen=True)
class Manifest:
    schema_version: str = SCHEMA_VERSION
    scenes: tuple[SceneEntry, ...] = ()
    # where relative capture paths resolve from; not serialized
    root: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))

    def resolve(self, rel: str) -> Path:
        base = self.root if self.root is not None else Path(".")
        return Path(base) / rel


def write_manifest(manifest: Manifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps({"schema_version": manifest.schema_version}, sort_keys=True)]
    for scene in manifest.scenes:
        entry = asdict(scene)
        for cap in entry["captures"]:
            cap["color"] = list(cap["color"])
        lines.append(json.dumps(entry, sort_keys=True))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing manifest file: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"empty manifest file: {path}")
    header = json.loads(lines[0])
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"manifest {path}: schema_version {version!r} != supported {SCHEMA_VERSION!r}")
    scenes = []
    for ln in lines[1:]:
        raw = json.loads(ln)
        captures = tuple(
            CaptureEntry(**{**cap, "color": tuple(cap["color"])}) for cap in raw.pop("captures")
        )
        scenes.append(SceneEntry(captures=captures, **raw))
    return Manifest(schema_version=version, scenes=tuple(scenes), root=path.parent)


def to_scene_record(manifest: Manifest, scene: SceneEntry) -> SceneRecord:
    """Load one scene's arrays from disk into a validated record structure."""
    captures = []
    for cap in scene.captures:
        image = ImageMap(load_array(manifest.resolve(cap.image_path)), MapKind.IMAGE)
        refl = shad = None
        if cap.reflectance_path is not None:
            refl = ImageMap(load_array(manifest.resolve(cap.reflectance_path)), MapKind.REFLECTANCE)
        if cap.shading_path is not None:
            shad = ImageMap(load_array(manifest.resolve(cap.shading_path)), MapKind.SHADING)
        captures.append(Capture(light=cap.light(), image=image, reflectance=refl, shading=shad))
    return SceneRecord(
        scene_id=scene.scene_id,
        configuration_id=scene.configuration_id,
        geometry_seed=scene.geometry_seed,
        captures=tuple(captures),
    )


def check_manifest(manifest: Manifest) -> list[str]:
    """Structural check: referenced files exist and light fields are valid."""
    v = []
    for scene in manifest.scenes:
        for i, cap in enumerate(scene.captures):
            name = f"{scene.scene_id} capture {i}"
            for p in (cap.image_path, cap.preview_path, cap.reflectance_path, cap.shading_path):
                if p is not None and not manifest.resolve(p).is_file():
                    v.append(f"{name}: missing file {manifest.resolve(p)}")
            v += cap.light().violations(name)
    return v


def _largest_remainder_counts(n: int, ratios: tuple[float, ...]) -> list[int]:
    quotas = [n * r for r in ratios]
    counts = [math.floor(q) for q in quotas]
    leftover = n - sum(counts)
    by_frac = sorted(range(len(ratios)), key=lambda i: (counts[i] - quotas[i], i))
    for i in by_frac[:leftover]:
        counts[i] += 1
    return counts


def split_by_configuration(manifest: Manifest, ratios: tuple[float, float, float], seed: int = 0) -> tuple[Manifest, Manifest, Manifest]:
    """Partition whole configurations (never single scenes) into three manifests.

    Counts follow the largest-remainder rule on shuffled configuration ids, so
    the same seed always yields the same membership.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"split ratios must be non-negative, got {ratios}")
    configs = sorted({s.configuration_id for s in manifest.scenes})
    if len(configs) < len(ratios):
        raise DataError(f"cannot split {len(configs)} configurations into {len(ratios)} parts")
    order = np.array(configs)
    np.random.default_rng(seed).shuffle(order)
    counts = _largest_remainder_counts(len(configs), tuple(ratios))
    splits = []
    start = 0
    for count in counts:
        members = set(order[start : start + count].tolist())
        start += count
        scenes = tuple(s for s in manifest.scenes if s.configuration_id in members)
        splits.append(replace(manifest, scenes=scenes))
    return splits[0], splits[1], splits[2]
