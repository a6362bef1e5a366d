"""HTTP inference API around a single loaded checkpoint.

Endpoints:
  POST /relight     relight an uploaded image under a new light
  GET  /health      readiness probe
  GET  /model-info  architecture summary, parameter count, checkpoint id

The process serves exactly one checkpoint; there is no hot-swap or model
management surface.  Responses are deterministic: the same image bytes,
light, and checkpoint produce byte-identical bodies.  Request timing is
reported in the ``X-Timing-Ms`` response header so it never perturbs the
body.

Inputs of any size are letterbox-resized to the 256x256 processing frame
and the relit result is restored to the original geometry.  When
``return_intrinsics`` is set the reflectance, shading, and relit maps are
also returned as float32 ``.npy`` payloads at the processing resolution,
where ``|relit - clip(reflectance * shading)| <= 1e-5`` holds exactly as
produced by the network; the restored 8-bit image is for display.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import io
import math
import time
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import JSONResponse
from PIL import Image

from .color import TEMP_MAX_K, TEMP_MIN_K
from .core import vector_light
from .net import RelightModel, load_checkpoint

__all__ = [
    "MAX_IMAGE_BYTES",
    "MAX_IMAGE_SIDE",
    "SERVICE_RESOLUTION",
    "create_app",
    "letterbox_frame",
    "restore_frame",
]

SERVICE_RESOLUTION = 256

# Decoded upload caps; anything larger is refused with 413 before decode work.
MAX_IMAGE_BYTES = 8 * 1024 * 1024
MAX_IMAGE_SIDE = 2048


class _ServiceState:
    """The one model this process serves, plus its provenance."""

    def __init__(self):
        self.model: Optional[RelightModel] = None
        self.checkpoint_id: str = ""

    @property
    def ready(self) -> bool:
        return self.model is not None

    def adopt(self, model: RelightModel, checkpoint_id: str) -> None:
        model.eval()
        self.model = model
        self.checkpoint_id = checkpoint_id

    def load(self, path) -> None:
        path = Path(path)
        payload = load_checkpoint(path)
        model = RelightModel(payload["model_config"])
        model.load_state_dict(payload["model_state"])
        digest = hashlib.sha256(path.read_bytes()).hexdigest()[:12]
        self.adopt(model, digest)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.model.parameters())


def _bad(field: str, why: str):
    return HTTPException(status_code=400, detail=f"{field}: {why}")


def _decode_image(payload: dict) -> np.ndarray:
    raw = payload.get("image")
    if not isinstance(raw, str) or not raw:
        raise _bad("image", "required base64 string")
    try:
        blob = base64.b64decode(raw, validate=True)
    except (binascii.Error, ValueError):
        raise _bad("image", "invalid base64")
    if len(blob) > MAX_IMAGE_BYTES:
        raise HTTPException(status_code=413, detail=f"image: payload exceeds {MAX_IMAGE_BYTES} bytes")
    try:
        with Image.open(io.BytesIO(blob)) as im:
            im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except Exception:
        raise _bad("image", "not a decodable raster image")
    h, w = arr.shape[:2]
    if max(h, w) > MAX_IMAGE_SIDE:
        raise HTTPException(status_code=413, detail=f"image: {w}x{h} exceeds {MAX_IMAGE_SIDE} per side")
    if min(h, w) < 8:
        raise _bad("image", f"{w}x{h} is below the 8x8 minimum")
    return arr


def _number(payload: dict, field: str) -> float:
    value = payload.get(field)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _bad(field, "required number")
    value = float(value)
    if not math.isfinite(value):
        raise _bad(field, "must be finite")
    return value


def _parse_light(payload: dict):
    pan = _number(payload, "pan") % (2.0 * math.pi)
    tilt = _number(payload, "tilt")
    if not 0.0 <= tilt <= math.pi / 2.0 + 1e-12:
        raise _bad("tilt", f"must lie in [0, pi/2], got {tilt}")
    has_temp = payload.get("temperature") is not None
    has_rgb = payload.get("rgb") is not None
    if has_temp == has_rgb:
        raise _bad("temperature/rgb", "exactly one of temperature or rgb is required")
    if has_temp:
        kelvin = _number(payload, "temperature")
        if not TEMP_MIN_K <= kelvin <= TEMP_MAX_K:
            raise _bad("temperature", f"must lie in [{TEMP_MIN_K:g}, {TEMP_MAX_K:g}] kelvin, got {kelvin}")
        return vector_light(pan, tilt, temperature=kelvin)
    rgb = payload.get("rgb")
    if not isinstance(rgb, (list, tuple)) or len(rgb) != 3:
        raise _bad("rgb", "must be a list of three numbers")
    try:
        rgb = [float(c) for c in rgb]
    except (TypeError, ValueError):
        raise _bad("rgb", "must be a list of three numbers")
    if any(not math.isfinite(c) or c < 0.0 or c > 1.0 for c in rgb):
        raise _bad("rgb", f"components must lie in [0, 1], got {rgb}")
    if max(rgb) <= 0.0:
        raise _bad("rgb", "at least one component must be positive")
    return vector_light(pan, tilt, color=tuple(rgb))


def letterbox_frame(arr: np.ndarray, size: int = SERVICE_RESOLUTION):
    """Fit the image into the square processing frame, zero-padded."""
    h, w = arr.shape[:2]
    t = torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)
    if (h, w) == (size, size):
        return t, (0, 0, h, w)
    scale = size / max(h, w)
    nh = max(1, round(h * scale))
    nw = max(1, round(w * scale))
    t = F.interpolate(t, size=(nh, nw), mode="bilinear", align_corners=False, antialias=True)
    canvas = torch.zeros(1, 3, size, size, dtype=t.dtype)
    top = (size - nh) // 2
    left = (size - nw) // 2
    canvas[:, :, top : top + nh, left : left + nw] = t
    return canvas, (top, left, nh, nw)


def restore_frame(t: torch.Tensor, box, height: int, width: int, size: int = SERVICE_RESOLUTION) -> np.ndarray:
    top, left, nh, nw = box
    if (height, width) != (size, size):
        t = t[:, :, top : top + nh, left : left + nw]
        t = F.interpolate(t, size=(height, width), mode="bilinear", align_corners=False, antialias=True)
    return t[0].permute(1, 2, 0).clamp(0.0, 1.0).numpy()


def _png_b64(arr: np.ndarray) -> str:
    eight_bit = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(eight_bit).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _npy_b64(t: torch.Tensor) -> str:
    arr = t[0].permute(1, 2, 0).numpy().astype(np.float32)
    buf = io.BytesIO()
    np.save(buf, arr)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(checkpoint_path=None, model: Optional[RelightModel] = None, checkpoint_id: str = "unsaved") -> FastAPI:
    """Build the service around one checkpoint file or an in-memory model."""
    state = _ServiceState()
    if model is not None:
        state.adopt(model, checkpoint_id)
    elif checkpoint_path is not None:
        state.load(checkpoint_path)

    app = FastAPI(title="relight", docs_url=None, redoc_url=None)
    app.state.relight = state

    @app.get("/health")
    def health():
        return {"status": "ready" if state.ready else "not_ready"}

    @app.get("/model-info")
    def model_info():
        if not state.ready:
            raise HTTPException(status_code=503, detail="model not loaded")
        return {
            "config": state.model.config.to_dict(),
            "parameter_count": state.parameter_count(),
            "checkpoint_id": state.checkpoint_id,
        }

    @app.post("/relight")
    def relight(payload: dict = Body(...)):
        if not state.ready:
            raise HTTPException(status_code=503, detail="model not loaded")
        started = time.perf_counter()
        arr = _decode_image(payload)
        light = _parse_light(payload)
        return_intrinsics = payload.get("return_intrinsics", False)
        if not isinstance(return_intrinsics, bool):
            raise _bad("return_intrinsics", "must be a boolean")

        height, width = arr.shape[:2]
        size = state.model.config.image_size
        frame, box = letterbox_frame(arr, size)
        light_t = torch.as_tensor(light.encode(), dtype=frame.dtype).unsqueeze(0)
        with torch.no_grad():
            outputs = state.model(frame, target_light=light_t)
        relit = outputs.relit_hat.clamp(0.0, 1.0)

        body = {
            "image": _png_b64(restore_frame(relit, box, height, width, size)),
            "width": width,
            "height": height,
            "checkpoint_id": state.checkpoint_id,
        }
        if return_intrinsics:
            if outputs.reflectance_hat is None:
                raise HTTPException(status_code=400, detail="return_intrinsics: model has no intrinsic decomposition")
            body["reflectance_npy"] = _npy_b64(outputs.reflectance_hat)
            body["shading_npy"] = _npy_b64(outputs.shading_new_hat)
            body["relit_npy"] = _npy_b64(relit)
        timing_ms = (time.perf_counter() - started) * 1000.0
        return JSONResponse(body, headers={"X-Timing-Ms": f"{timing_ms:.3f}"})

    return app
