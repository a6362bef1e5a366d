"""Optimization loop: alternating generator/discriminator updates over
cross-relighting batches, step-decay learning rate, deterministic seeding,
periodic checkpoints, and an append-only metrics log.

Batch composition at step s depends only on (seed, s), never on loader
timing, so a resumed run draws exactly the samples a fresh run would.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import torch

from .core import SceneRecord, validate
from .data import Manifest, assemble_cross_batch, sample_pair, to_scene_record
from .errors import ConfigError, DataError, RelightError, SchemaVersionError
from .losses import (
    LossConfig,
    discriminator_gan_loss,
    mu_schedule,
    supervised_terms,
    unsupervised_terms,
)
from .net import (
    ModelConfig,
    PatchDiscriminator,
    StageOutputs,
    load_checkpoint,
    rng_restore,
    save_checkpoint,
)

EXPERIMENT_SCHEMA_VERSION = "relight-experiment/1"


@dataclass(frozen=True)
class TrainConfig:
    """Loop hyperparameters.

    ``batch_size`` counts the assembled batch; with cross-relighting each of
    the batch_size/2 drawn samples contributes itself and its reversal.
    """

    lr_initial: float = 2e-4
    batch_size: int = 18
    total_steps: int = 1000
    decay_factor: float = 0.5
    decay_interval: Optional[int] = None  # None: quarter of the run
    seed: int = 0
    cross_relighting: bool = True
    checkpoint_every: Optional[int] = None  # None: quarter of the run
    resume_checkpoint: Optional[str] = None

    def __post_init__(self):
        if self.lr_initial <= 0:
            raise ConfigError("lr_initial must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.cross_relighting and self.batch_size % 2:
            raise ConfigError("batch_size must be even with cross_relighting: reversal doubles the draw")
        if self.total_steps < 1:
            raise ConfigError("total_steps must be at least 1")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigError("decay_factor must lie in (0, 1]")
        if self.decay_interval is not None and self.decay_interval < 1:
            raise ConfigError("decay_interval must be at least 1")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be at least 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    """One serializable record of everything that defines a run."""

    model: ModelConfig
    losses: LossConfig
    train: TrainConfig

    def to_dict(self) -> dict:
        return {
            "schema_version": EXPERIMENT_SCHEMA_VERSION,
            "model": self.model.to_dict(),
            "losses": self.losses.to_dict(),
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        version = d.get("schema_version")
        if version != EXPERIMENT_SCHEMA_VERSION:
            raise SchemaVersionError(
                f"experiment config schema_version {version!r} != supported {EXPERIMENT_SCHEMA_VERSION!r}"
            )
        return cls(
            model=ModelConfig.from_dict(d.get("model", {})),
            losses=LossConfig.from_dict(d.get("losses", {})),
            train=TrainConfig.from_dict(d.get("train", {})),
        )

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"missing experiment config: {path}")
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"experiment config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)


def lr_schedule(step: int, config: TrainConfig) -> float:
    """Step decay: lr_initial * factor^(completed intervals)."""
    interval = config.decay_interval or max(config.total_steps // 4, 1)
    return config.lr_initial * config.decay_factor ** (step // interval)


@dataclass
class TrainResult:
    checkpoint_path: Optional[Path]
    log_path: Optional[Path]
    history: list


def _as_scene_records(dataset) -> list:
    if isinstance(dataset, Manifest):
        return [to_scene_record(dataset, scene) for scene in dataset.scenes]
    return list(dataset)


def _slice_outputs(out: StageOutputs, lo: int, hi: int) -> StageOutputs:
    cut = lambda t: None if t is None else t[lo:hi]
    return StageOutputs(**{f.name: cut(getattr(out, f.name)) for f in dataclasses.fields(StageOutputs)})


def _slice_batch(batch, lo: int, hi: int):
    cut = lambda t: None if t is None else t[lo:hi]
    return dataclasses.replace(
        batch,
        inputs=batch.inputs[lo:hi],
        original_lights=batch.original_lights[lo:hi],
        target_lights=batch.target_lights[lo:hi],
        targets=batch.targets[lo:hi],
        gt_reflectance=cut(batch.gt_reflectance),
        gt_shading_ori=cut(batch.gt_shading_ori),
        gt_shading_new=cut(batch.gt_shading_new),
        reversed_flag=cut(batch.reversed_flag),
    )


def _set_lr(optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def make_optimizer(parameters, lr: float) -> torch.optim.Adam:
    """The optimizer contract every run uses: Adam(0.9, 0.999, eps 1e-8)."""
    return torch.optim.Adam(parameters, lr=lr, betas=(0.9, 0.999), eps=1e-8)


def train(
    model,
    dataset,
    train_config: TrainConfig,
    loss_config: Optional[LossConfig] = None,
    out_dir=None,
    discriminator=None,
    provider=None,
) -> TrainResult:
    """Run the full loop and return the final checkpoint path plus history.

    ``dataset`` is a Manifest or an iterable of SceneRecords; it must pass
    validation.  With ``out_dir`` unset nothing is written to disk and only
    the in-memory history is returned.
    """
    loss_config = loss_config or LossConfig()
    if loss_config.uiid_enabled and not train_config.cross_relighting:
        raise ConfigError("the unsupervised constraints compare batch halves; enable cross_relighting")

    scenes = _as_scene_records(dataset)
    if not scenes:
        raise DataError("training needs at least one scene")
    for scene in scenes:
        problems = validate(scene)
        if problems:
            raise DataError(f"dataset failed validation: {problems[0]}")

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    start_step = 0
    if train_config.resume_checkpoint is not None:
        payload = load_checkpoint(train_config.resume_checkpoint, expect_config=model.config)
        model.load_state_dict(payload["model_state"])
        start_step = payload["step"]
        if discriminator is None:
            discriminator = PatchDiscriminator()
        if "discriminator_state" in payload:
            discriminator.load_state_dict(payload["discriminator_state"])
        rng_restore(payload["rng"])
    else:
        torch.manual_seed(train_config.seed)
        if discriminator is None:
            discriminator = PatchDiscriminator()

    opt_g = make_optimizer(model.parameters(), train_config.lr_initial)
    opt_d = make_optimizer(discriminator.parameters(), train_config.lr_initial)
    if train_config.resume_checkpoint is not None:
        payload = load_checkpoint(train_config.resume_checkpoint)
        if "opt_g_state" in payload:
            opt_g.load_state_dict(payload["opt_g_state"])
        if "opt_d_state" in payload:
            opt_d.load_state_dict(payload["opt_d_state"])

    b0 = train_config.batch_size // 2 if train_config.cross_relighting else train_config.batch_size
    ckpt_every = train_config.checkpoint_every or max(train_config.total_steps // 4, 1)
    history: list = []
    last_ckpt: Optional[Path] = None
    log_path = out_dir / "metrics.csv" if out_dir is not None else None
    log_file = None
    if log_path is not None:
        fresh = not log_path.exists() or start_step == 0
        log_file = open(log_path, "w" if fresh else "a")
        if fresh:
            log_file.write("step,name,value\n")

    def checkpoint(step: int, name: str) -> Path:
        return save_checkpoint(
            out_dir / name,
            model,
            model.config,
            step=step,
            discriminator=discriminator,
            opt_g=opt_g,
            opt_d=opt_d,
        )

    def ensure_finite(value: torch.Tensor, what: str, step: int) -> None:
        if not torch.isfinite(value):
            where = last_ckpt if last_ckpt is not None else "none"
            raise RelightError(
                f"non-finite {what} at step {step}; training aborted, last good checkpoint: {where}"
            )

    model.train()
    discriminator.train()
    try:
        for step in range(start_step, train_config.total_steps):
            rng = np.random.default_rng((train_config.seed, step))
            picks = rng.integers(0, len(scenes), size=b0)
            samples = [sample_pair(scenes[int(i)], rng) for i in picks]
            batch = assemble_cross_batch(samples, include_reversed=train_config.cross_relighting)

            lr = lr_schedule(step, train_config)
            _set_lr(opt_g, lr)
            _set_lr(opt_d, lr)

            outputs = model(batch.inputs, target_light=batch.target_lights)
            d_fake = discriminator(batch.inputs, outputs.relit_hat)
            record = {"step": step, "lr": lr}
            if loss_config.uiid_enabled:
                mu = mu_schedule(step, train_config.total_steps, loss_config)
                terms = unsupervised_terms(
                    _slice_outputs(outputs, 0, b0),
                    _slice_outputs(outputs, b0, 2 * b0),
                    _slice_batch(batch, 0, b0),
                    loss_config,
                    mu=mu,
                    provider=provider,
                    d_fake=d_fake[:b0],
                    d_fake_rev=d_fake[b0:],
                )
                record["mu"] = mu
            else:
                terms = supervised_terms(outputs, batch, loss_config, provider, d_fake)
            loss_g = sum(terms.values())
            ensure_finite(loss_g, "generator loss", step)
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

            d_real = discriminator(batch.inputs, batch.targets)
            d_fake = discriminator(batch.inputs, outputs.relit_hat.detach())
            loss_d = discriminator_gan_loss(d_real, d_fake)
            ensure_finite(loss_d, "discriminator loss", step)
            opt_d.zero_grad()
            loss_d.backward()
            opt_d.step()

            record["loss_g"] = float(loss_g.detach())
            record["loss_d"] = float(loss_d.detach())
            for name, value in terms.items():
                record[f"g_{name}"] = float(value.detach())
            history.append(record)
            if log_file is not None:
                for name, value in record.items():
                    if name != "step":
                        log_file.write(f"{step},{name},{value:.10g}\n")
                log_file.flush()

            done = step + 1
            if out_dir is not None and (done % ckpt_every == 0 or done == train_config.total_steps):
                last_ckpt = checkpoint(done, f"step_{done:06d}.pt")
    finally:
        if log_file is not None:
            log_file.close()

    final_path = None
    if out_dir is not None:
        final_path = checkpoint(train_config.total_steps, "final.pt")
    return TrainResult(checkpoint_path=final_path, log_path=log_path, history=history)
