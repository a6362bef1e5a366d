import csv
import json

import pytest
import torch
from PIL import Image

from relight.cli import main
from relight.losses import LossConfig
from relight.net import ModelConfig
from relight.train import ExperimentConfig, TrainConfig

ABLATION_ROWS = [
    "w/o ResNet(U-net instead)",
    "w/o non-local blocks",
    "w/o two-stage model",
    "w/o cross-relighting",
    "w/o lpips",
    "w/o ssim",
    "w/o IID-GT",
    "w/o IID-GT (w/ UIID)",
    "w/o L_rc",
    "w/o L_sc",
    "w/o L_scs + L_scs*",
    "w/o L_ir",
]


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["gen", "--scenes", "2", "--lights", "2", "--res", "64", "--seed", "3", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def manifest(dataset_dir):
    path = dataset_dir / "manifest.jsonl"
    assert path.is_file()
    return path


@pytest.fixture(scope="module")
def experiment_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "experiment.json"
    exp = ExperimentConfig(
        model=ModelConfig(
            base_channels=4,
            bottleneck_channels=16,
            stage1_shared_blocks=1,
            stage1_branch_blocks=1,
            stage2_pre_blocks=1,
            stage2_post_blocks=1,
            light_feature_channels=4,
            image_size=64,
        ),
        losses=LossConfig(),
        train=TrainConfig(batch_size=4, total_steps=50, seed=0),
    )
    exp.save(path)
    return path


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, manifest, experiment_file):
    out = tmp_path_factory.mktemp("run")
    code = main([
        "train",
        "--data", str(manifest),
        "--out", str(out),
        "--config", str(experiment_file),
        "--steps", "2",
    ])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def checkpoint(run_dir):
    path = run_dir / "final.pt"
    assert path.is_file()
    return path


class TestParsing:
    def test_no_command_is_config_error(self, capsys):
        assert main([]) == 2
        capsys.readouterr()

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        out = capsys.readouterr().out
        for name in ("gen", "stats", "train", "eval", "relight", "animate", "serve", "info"):
            assert name in out

    def test_train_help_names_every_ablation_row(self, capsys):
        assert main(["train", "--help"]) == 0
        flat = " ".join(capsys.readouterr().out.split())
        for row in ABLATION_ROWS:
            assert row in flat, row


class TestGen:
    def test_writes_manifest(self, dataset_dir, manifest, capsys):
        assert (dataset_dir / "scene_0000" / "image_00.npy").is_file()
        assert (dataset_dir / "scene_0000" / "image_00.png").is_file()

    def test_rejects_nonpositive_counts(self, tmp_path, capsys):
        assert main(["gen", "--scenes", "0", "--out", str(tmp_path)]) == 2
        capsys.readouterr()


class TestStats:
    def test_prints_ratio_rows(self, manifest, capsys):
        assert main(["stats", "--data", str(manifest)]) == 0
        out = capsys.readouterr().out
        assert "grad S / grad R" in out
        assert "grad S / grad I" in out

    def test_missing_manifest_is_data_error(self, tmp_path, capsys):
        assert main(["stats", "--data", str(tmp_path / "nope.jsonl")]) == 3
        capsys.readouterr()


class TestTrain:
    def test_flags_override_config_file(self, run_dir, capsys):
        saved = json.loads((run_dir / "experiment.json").read_text())
        # --steps 2 beat the file's 50; untouched fields came from the file
        assert saved["train"]["total_steps"] == 2
        assert saved["train"]["batch_size"] == 4
        assert saved["model"]["base_channels"] == 4

    def test_checkpoint_and_log_written(self, run_dir, checkpoint):
        assert checkpoint.is_file()
        assert (run_dir / "metrics.csv").is_file()

    def test_uiid_needs_cross_relighting(self, manifest, experiment_file, tmp_path, capsys):
        code = main([
            "train",
            "--data", str(manifest),
            "--out", str(tmp_path),
            "--config", str(experiment_file),
            "--steps", "1",
            "--uiid", "--no-iid-gt", "--no-cross-relighting",
        ])
        assert code == 2
        capsys.readouterr()


class TestEval:
    def test_table_and_csv(self, manifest, checkpoint, tmp_path, capsys):
        rows = tmp_path / "rows.csv"
        code = main([
            "eval",
            "--data", str(manifest),
            "--checkpoint", str(checkpoint),
            "--max-pairs", "2",
            "--csv", str(rows),
        ])
        assert code == 0
        out = capsys.readouterr().out
        for token in ("MPS ↑", "SSIM ↑", "LPIPS ↓", "PSNR ↑"):
            assert token in out
        with open(rows, newline="") as fh:
            records = list(csv.DictReader(fh))
        assert len(records) == 3
        assert records[-1]["scene_id"] == "mean"

    def test_missing_checkpoint_is_data_error(self, manifest, tmp_path, capsys):
        assert main(["eval", "--data", str(manifest), "--checkpoint", str(tmp_path / "no.pt")]) == 3
        capsys.readouterr()


def relight_args(dataset_dir, checkpoint, out, image="scene_0000/image_00.png", **extra):
    args = [
        "relight",
        "--image", str(dataset_dir / image),
        "--checkpoint", str(checkpoint),
        "--pan", "1.0",
        "--tilt", "0.5",
        "--out", str(out),
    ]
    light = extra.pop("light", ["--temperature", "5000"])
    for k, v in extra.items():
        args += [k] + ([str(x) for x in v] if isinstance(v, list) else [str(v)])
    return args + light


class TestRelight:
    def test_writes_image(self, dataset_dir, checkpoint, tmp_path, capsys):
        out = tmp_path / "relit.png"
        assert main(relight_args(dataset_dir, checkpoint, out)) == 0
        capsys.readouterr()
        with Image.open(out) as im:
            assert im.size == (64, 64)

    def test_npy_input_and_intrinsics(self, dataset_dir, checkpoint, tmp_path, capsys):
        out = tmp_path / "relit.png"
        args = relight_args(
            dataset_dir, checkpoint, out,
            image="scene_0000/image_00.npy",
            **{"--intrinsics-dir": tmp_path / "maps"},
        )
        assert main(args) == 0
        capsys.readouterr()
        for name in ("reflectance.npy", "shading.npy", "reflectance.png", "shading.png"):
            assert (tmp_path / "maps" / name).is_file()

    def test_rgb_light(self, dataset_dir, checkpoint, tmp_path, capsys):
        args = relight_args(dataset_dir, checkpoint, tmp_path / "r.png", light=["--rgb", "1.0", "0.5", "0.25"])
        assert main(args) == 0
        capsys.readouterr()

    @pytest.mark.parametrize(
        "light",
        [
            ["--temperature", "5000", "--rgb", "1", "1", "1"],
            [],
            ["--temperature", "500"],
        ],
    )
    def test_light_flag_misuse_is_config_error(self, dataset_dir, checkpoint, tmp_path, light, capsys):
        assert main(relight_args(dataset_dir, checkpoint, tmp_path / "x.png", light=light)) == 2
        capsys.readouterr()

    def test_tilt_out_of_range(self, dataset_dir, checkpoint, tmp_path, capsys):
        args = relight_args(dataset_dir, checkpoint, tmp_path / "x.png")
        args[args.index("--tilt") + 1] = "2.0"
        assert main(args) == 2
        capsys.readouterr()

    def test_missing_checkpoint_is_data_error(self, dataset_dir, tmp_path, capsys):
        args = relight_args(dataset_dir, tmp_path / "no.pt", tmp_path / "x.png")
        assert main(args) == 3
        capsys.readouterr()

    def test_tampered_checkpoint_is_data_error(self, dataset_dir, tmp_path, capsys):
        bad = tmp_path / "bad.pt"
        torch.save({"schema_version": "nonsense"}, bad)
        assert main(relight_args(dataset_dir, bad, tmp_path / "x.png")) == 3
        capsys.readouterr()


class TestAnimate:
    def test_exact_frame_count(self, dataset_dir, checkpoint, tmp_path, capsys):
        out = tmp_path / "frames"
        code = main([
            "animate",
            "--image", str(dataset_dir / "scene_0000" / "image_00.png"),
            "--checkpoint", str(checkpoint),
            "--frames", "3",
            "--tilt", "0.5",
            "--temperature", "5000",
            "--out", str(out),
        ])
        assert code == 0
        capsys.readouterr()
        frames = sorted(p.name for p in out.iterdir())
        assert frames == ["frame_000.png", "frame_001.png", "frame_002.png"]

    def test_zero_frames_is_config_error(self, dataset_dir, checkpoint, tmp_path, capsys):
        code = main([
            "animate",
            "--image", str(dataset_dir / "scene_0000" / "image_00.png"),
            "--checkpoint", str(checkpoint),
            "--frames", "0",
            "--tilt", "0.5",
            "--temperature", "5000",
            "--out", str(tmp_path / "f"),
        ])
        assert code == 2
        capsys.readouterr()


class TestInfo:
    def test_counts_for_flag_built_variant(self, capsys):
        code = main(["info", "--base-channels", "4", "--bottleneck-channels", "64", "--image-size", "32"])
        assert code == 0
        out = capsys.readouterr().out
        assert "Params (M)" in out
        assert "MACs (G)" in out
        assert "full model" in out

    def test_counts_from_checkpoint(self, checkpoint, capsys):
        assert main(["info", "--checkpoint", str(checkpoint)]) == 0
        assert "full model" in capsys.readouterr().out
