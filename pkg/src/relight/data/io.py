"""Array and raster persistence.

Authoritative pixel data is stored as float32 `.npy` (shading exceeds 1, and
the product identity must survive reload within 1e-5, which 8-bit cannot
guarantee).  8-bit PNGs are written alongside as display previews.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError


def save_array(path, arr: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, np.asarray(arr, dtype=np.float32))


def load_array(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing array file: {path}")
    return np.load(path)


def save_png(path, image: np.ndarray) -> None:
    """8-bit preview of a [0,1] image; quantized, not authoritative."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    u8 = (np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).round().astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing image file: {path}")
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
