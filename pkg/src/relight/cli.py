"""Operator entry points.

One command per process: dataset synthesis, dataset statistics, training,
evaluation, single-image relighting, pan-sweep animation, the HTTP service,
and an architecture cost summary.  Exit codes: 0 ok, 2 config error, 3 data
error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from pathlib import Path

from .errors import ConfigError, DataError

TWO_PI = 2.0 * math.pi


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relight",
        description="single-image scene relighting around intrinsic decomposition",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("gen", help="render a synthetic dataset with exact intrinsic ground truth")
    g.add_argument("--scenes", type=int, required=True, help="number of scenes")
    g.add_argument("--lights", type=int, default=4, help="captures per scene")
    g.add_argument("--res", type=int, default=256, help="square image resolution")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True, help="output dataset directory")
    g.set_defaults(handler=cmd_gen)

    s = sub.add_parser("stats", help="opponent-space gradient statistics of a dataset")
    s.add_argument("--data", type=Path, required=True, help="manifest file")
    s.set_defaults(handler=cmd_stats)

    t = sub.add_parser("train", help="train the relighting model")
    t.add_argument("--data", type=Path, required=True, help="manifest file")
    t.add_argument("--out", type=Path, required=True, help="run directory for checkpoints and logs")
    t.add_argument("--config", type=Path, default=None, help="experiment config JSON; flags override its fields")
    t.add_argument("--steps", type=int, default=None, help="total optimizer steps")
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--lr", type=float, default=None, help="initial learning rate")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--resume", type=Path, default=None, help="checkpoint to continue from")
    t.add_argument(
        "--no-cross-relighting",
        action="store_true",
        help='train on forward pairs only, dropping the reversed half of every batch ("w/o cross-relighting")',
    )
    _add_model_flags(t)
    _add_loss_flags(t)
    t.set_defaults(handler=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    e.add_argument("--data", type=Path, required=True, help="manifest file")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--resolution", type=int, default=None, help="defaults to the model's native resolution")
    e.add_argument("--max-pairs", type=int, default=None, help="seeded subsample instead of all ordered pairs")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--csv", type=Path, default=None, help="also write per-pair rows as CSV")
    e.set_defaults(handler=cmd_eval)

    r = sub.add_parser("relight", help="relight one image under a new light")
    r.add_argument("--image", type=Path, required=True, help="input image (.png or .npy)")
    r.add_argument("--checkpoint", type=Path, required=True)
    r.add_argument("--pan", type=float, required=True, help="azimuth in radians")
    r.add_argument("--tilt", type=float, required=True, help="elevation in radians, [0, pi/2]")
    r.add_argument("--temperature", type=float, default=None, help="light color as kelvin")
    r.add_argument("--rgb", type=float, nargs=3, default=None, metavar=("R", "G", "B"), help="light color as [0,1] RGB")
    r.add_argument("--out", type=Path, required=True, help="output image path")
    r.add_argument("--intrinsics-dir", type=Path, default=None, help="also write reflectance and shading maps here")
    r.set_defaults(handler=cmd_relight)

    a = sub.add_parser("animate", help="sweep pan over a full turn and write the frames")
    a.add_argument("--image", type=Path, required=True, help="input image (.png or .npy)")
    a.add_argument("--checkpoint", type=Path, required=True)
    a.add_argument("--frames", type=int, required=True, help="number of frames over one full pan turn")
    a.add_argument("--tilt", type=float, required=True)
    a.add_argument("--start-pan", type=float, default=0.0)
    a.add_argument("--temperature", type=float, default=None)
    a.add_argument("--rgb", type=float, nargs=3, default=None, metavar=("R", "G", "B"))
    a.add_argument("--out", type=Path, required=True, help="output directory")
    a.set_defaults(handler=cmd_animate)

    v = sub.add_parser("serve", help="run the HTTP inference service")
    v.add_argument("--checkpoint", type=Path, required=True)
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8000)
    v.set_defaults(handler=cmd_serve)

    i = sub.add_parser("info", help="parameter and MAC counts for a model variant")
    i.add_argument("--checkpoint", type=Path, default=None, help="read the architecture from a checkpoint")
    _add_model_flags(i)
    i.set_defaults(handler=cmd_info)

    return parser


def _add_model_flags(sp) -> None:
    m = sp.add_argument_group("model variants")
    m.add_argument(
        "--unet",
        action="store_true",
        help='U-net trunks instead of residual ones; combine with --no-nonlocal ("w/o ResNet(U-net instead)")',
    )
    m.add_argument("--no-nonlocal", action="store_true", help='drop the attention blocks ("w/o non-local blocks")')
    m.add_argument(
        "--no-two-stage",
        action="store_true",
        help='skip intrinsic decomposition and relight directly ("w/o two-stage model")',
    )
    m.add_argument("--image-size", type=int, default=None, help="training/native resolution")
    m.add_argument("--base-channels", type=int, default=None)
    m.add_argument("--bottleneck-channels", type=int, default=None)


def _add_loss_flags(sp) -> None:
    l = sp.add_argument_group("loss variants")
    l.add_argument("--no-lpips", action="store_true", help='drop the perceptual image term ("w/o lpips")')
    l.add_argument("--no-ssim", action="store_true", help='drop the structural image term ("w/o ssim")')
    l.add_argument(
        "--no-iid-gt",
        action="store_true",
        help='ignore intrinsic ground truth during training ("w/o IID-GT")',
    )
    l.add_argument(
        "--uiid",
        action="store_true",
        help='enable the unsupervised intrinsic constraints; with --no-iid-gt this is "w/o IID-GT (w/ UIID)"',
    )
    l.add_argument("--no-rc", action="store_true", help='drop reflectance consistency ("w/o L_rc")')
    l.add_argument("--no-sc", action="store_true", help='drop shading consistency ("w/o L_sc")')
    l.add_argument("--no-scs", action="store_true", help='drop the shading-smoothness prior ("w/o L_scs + L_scs*")')
    l.add_argument("--no-ir", action="store_true", help='drop decayed reflectance anchoring ("w/o L_ir")')


def _model_overrides(args) -> dict:
    over = {}
    if args.unet:
        over["backbone"] = "unet"
    if args.no_nonlocal:
        over["use_nonlocal"] = False
    if args.no_two_stage:
        over["use_two_stage"] = False
    if args.image_size is not None:
        over["image_size"] = args.image_size
    if args.base_channels is not None:
        over["base_channels"] = args.base_channels
    if args.bottleneck_channels is not None:
        over["bottleneck_channels"] = args.bottleneck_channels
    return over


def _build_experiment(args):
    from .losses import LossConfig
    from .net import ModelConfig
    from .train import ExperimentConfig, TrainConfig

    if args.config is not None:
        exp = ExperimentConfig.load(args.config)
    else:
        exp = ExperimentConfig(model=ModelConfig(), losses=LossConfig(), train=TrainConfig())

    model_over = _model_overrides(args)
    loss_over = {}
    if args.no_lpips:
        loss_over["use_lpips"] = False
    if args.no_ssim:
        loss_over["use_ssim"] = False
    if args.uiid:
        loss_over["uiid_enabled"] = True
    if args.no_rc:
        loss_over["use_rc"] = False
    if args.no_sc:
        loss_over["use_sc"] = False
    if args.no_scs:
        loss_over["use_scs"] = False
    if args.no_ir:
        loss_over["use_ir"] = False
    train_over = {}
    if args.steps is not None:
        train_over["total_steps"] = args.steps
    if args.batch_size is not None:
        train_over["batch_size"] = args.batch_size
    if args.lr is not None:
        train_over["lr_initial"] = args.lr
    if args.seed is not None:
        train_over["seed"] = args.seed
    if args.resume is not None:
        train_over["resume_checkpoint"] = str(args.resume)
    if args.no_cross_relighting:
        train_over["cross_relighting"] = False

    return ExperimentConfig(
        model=dataclasses.replace(exp.model, **model_over) if model_over else exp.model,
        losses=dataclasses.replace(exp.losses, **loss_over) if loss_over else exp.losses,
        train=dataclasses.replace(exp.train, **train_over) if train_over else exp.train,
    )


def _load_scenes(manifest_path):
    from .data import read_manifest, to_scene_record

    manifest = read_manifest(manifest_path)
    return [to_scene_record(manifest, scene) for scene in manifest.scenes]


def _strip_intrinsics(scene):
    from .core import Capture

    captures = tuple(Capture(light=c.light, image=c.image) for c in scene.captures)
    return dataclasses.replace(scene, captures=captures)


def _load_model(path):
    from .net import RelightModel, load_checkpoint

    payload = load_checkpoint(path)
    model = RelightModel(payload["model_config"])
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, payload


def _build_light(pan: float, tilt: float, temperature, rgb):
    from .color import TEMP_MAX_K, TEMP_MIN_K
    from .core import vector_light

    if (temperature is None) == (rgb is None):
        raise ConfigError("exactly one of --temperature or --rgb is required")
    if not math.isfinite(pan):
        raise ConfigError("--pan must be finite")
    if not 0.0 <= tilt <= math.pi / 2.0 + 1e-12:
        raise ConfigError(f"--tilt must lie in [0, pi/2], got {tilt}")
    if temperature is not None:
        if not TEMP_MIN_K <= temperature <= TEMP_MAX_K:
            raise ConfigError(f"--temperature must lie in [{TEMP_MIN_K:g}, {TEMP_MAX_K:g}] kelvin, got {temperature}")
        return vector_light(pan % TWO_PI, tilt, temperature=temperature)
    if any(not math.isfinite(c) or c < 0.0 or c > 1.0 for c in rgb) or max(rgb) <= 0.0:
        raise ConfigError(f"--rgb components must lie in [0, 1] with a positive maximum, got {list(rgb)}")
    return vector_light(pan % TWO_PI, tilt, color=tuple(rgb))


def _read_input_image(path: Path):
    from .data import load_array, load_png

    if path.suffix == ".npy":
        return load_array(path)
    return load_png(path)


def _forward_frames(model, image_path: Path, lights):
    """Letterbox once, run each light, restore each frame to input geometry."""
    import numpy as np
    import torch

    from .service import letterbox_frame, restore_frame

    arr = np.asarray(_read_input_image(image_path), dtype=np.float32)
    height, width = arr.shape[:2]
    size = model.config.image_size
    frame, box = letterbox_frame(arr, size)
    results = []
    with torch.no_grad():
        for light in lights:
            light_t = torch.as_tensor(light.encode(), dtype=frame.dtype).unsqueeze(0)
            outputs = model(frame, target_light=light_t)
            relit = outputs.relit_hat.clamp(0.0, 1.0)
            results.append((restore_frame(relit, box, height, width, size), outputs))
    return results


def cmd_gen(args) -> int:
    from .synth import generate_dataset

    if args.scenes < 1 or args.lights < 1:
        raise ConfigError(f"--scenes and --lights must be positive, got {args.scenes} and {args.lights}")
    manifest = generate_dataset(
        args.scenes, args.lights, out_dir=args.out, resolution=args.res, seed=args.seed
    )
    print(f"wrote {args.scenes} scenes x {args.lights} lights at {args.res}x{args.res}")
    print(f"manifest: {manifest}")
    return 0


def cmd_stats(args) -> int:
    from .color import chromaticity_stats

    triples = [
        (capture.image.data, capture.reflectance.data, capture.shading.data)
        for scene in _load_scenes(args.data)
        for capture in scene.captures
        if capture.reflectance is not None and capture.shading is not None
    ]
    if not triples:
        raise DataError(f"no captures with intrinsic ground truth in {args.data}")
    print(chromaticity_stats(triples).format_table())
    return 0


def cmd_train(args) -> int:
    from .net import RelightModel
    from .train import train

    exp = _build_experiment(args)
    scenes = _load_scenes(args.data)
    if args.no_iid_gt:
        scenes = [_strip_intrinsics(s) for s in scenes]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    exp.save(out / "experiment.json")
    model = RelightModel(exp.model)
    result = train(model, scenes, exp.train, exp.losses, out_dir=out)
    print(f"trained {exp.train.total_steps} steps on {len(scenes)} scenes")
    if result.history:
        print(f"final generator loss: {result.history[-1]['loss_g']:.4f}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    from .metrics import evaluate

    model, _ = _load_model(args.checkpoint)
    scenes = _load_scenes(args.data)
    table = evaluate(
        model,
        scenes,
        resolution=args.resolution or model.config.image_size,
        max_pairs=args.max_pairs,
        seed=args.seed,
    )
    print(table.format_table())
    if args.csv is not None:
        records = table.to_records()
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(records[0]))
            writer.writeheader()
            writer.writerows(records)
        print(f"rows: {args.csv}")
    return 0


def cmd_relight(args) -> int:
    from .data import save_array, save_png

    model, _ = _load_model(args.checkpoint)
    light = _build_light(args.pan, args.tilt, args.temperature, args.rgb)
    (relit, outputs), = _forward_frames(model, args.image, [light])
    save_png(args.out, relit)
    print(f"relit image: {args.out}")
    if args.intrinsics_dir is not None:
        if outputs.reflectance_hat is None:
            raise ConfigError("--intrinsics-dir needs a model with the intrinsic decomposition stage")
        for name, tensor in (("reflectance", outputs.reflectance_hat), ("shading", outputs.shading_new_hat)):
            arr = tensor[0].permute(1, 2, 0).numpy()
            save_array(args.intrinsics_dir / f"{name}.npy", arr)
            save_png(args.intrinsics_dir / f"{name}.png", arr)
        print(f"intrinsics: {args.intrinsics_dir}")
    return 0


def cmd_animate(args) -> int:
    from .data import save_png

    if args.frames < 1:
        raise ConfigError(f"--frames must be positive, got {args.frames}")
    model, _ = _load_model(args.checkpoint)
    lights = [
        _build_light(args.start_pan + k * TWO_PI / args.frames, args.tilt, args.temperature, args.rgb)
        for k in range(args.frames)
    ]
    results = _forward_frames(model, args.image, lights)
    args.out.mkdir(parents=True, exist_ok=True)
    for k, (relit, _) in enumerate(results):
        save_png(args.out / f"frame_{k:03d}.png", relit)
    print(f"wrote {args.frames} frames to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint_path=args.checkpoint)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_info(args) -> int:
    from .net import ModelConfig, RelightModel, count_params_and_macs

    if args.checkpoint is not None:
        model, _ = _load_model(args.checkpoint)
        config = model.config
    else:
        config = ModelConfig(**_model_overrides(args))
        model = RelightModel(config)
    params, macs = count_params_and_macs(model, config.image_size)
    print(f"{'variant':<24}{'Params (M)':>12}{'MACs (G)':>12}")
    print(f"{_variant_name(config):<24}{params / 1e6:>12.2f}{macs / 1e9:>12.2f}")
    print(f"native resolution: {config.image_size}x{config.image_size}")
    return 0


def _variant_name(config) -> str:
    tags = []
    if config.backbone != "resnet":
        tags.append(config.backbone)
    if not config.use_nonlocal:
        tags.append("no-nonlocal")
    if not config.use_two_stage:
        tags.append("single-stage")
    return "+".join(tags) if tags else "full model"


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
