"""Checkpoint persistence: weights + config + optimizer + RNG states.

Everything needed to resume a run bit-for-bit lives in one file.  Loading
verifies the schema version and, when the caller provides an expected
ModelConfig, rejects mismatched architectures instead of part-loading.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..errors import ConfigError, DataError, SchemaVersionError
from .model import ModelConfig

CHECKPOINT_SCHEMA_VERSION = "relight-checkpoint/1"


def rng_snapshot() -> dict:
    return {
        "torch": torch.get_rng_state(),
        "numpy": np.random.get_state(),
        "python": random.getstate(),
    }


def rng_restore(snap: dict) -> None:
    torch.set_rng_state(snap["torch"])
    np.random.set_state(snap["numpy"])
    random.setstate(snap["python"])


def save_checkpoint(
    path,
    model,
    config: ModelConfig,
    step: int = 0,
    discriminator=None,
    opt_g=None,
    opt_d=None,
    extra: Optional[dict] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "model_config": config.to_dict(),
        "model_state": model.state_dict(),
        "step": step,
        "rng": rng_snapshot(),
    }
    if discriminator is not None:
        payload["discriminator_state"] = discriminator.state_dict()
    if opt_g is not None:
        payload["opt_g_state"] = opt_g.state_dict()
    if opt_d is not None:
        payload["opt_d_state"] = opt_d.state_dict()
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)
    return path


def load_checkpoint(path, expect_config: Optional[ModelConfig] = None) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing checkpoint file: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise SchemaVersionError(f"checkpoint {path}: schema_version {version!r} != supported {CHECKPOINT_SCHEMA_VERSION!r}")
    config = ModelConfig.from_dict(payload["model_config"])
    if expect_config is not None and config != expect_config:
        raise ConfigError(f"checkpoint {path} was written for a different architecture: {config} != {expect_config}")
    payload["model_config"] = config
    return payload
