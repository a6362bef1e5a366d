import json
from pathlib import Path

import numpy as np
import pytest
import torch

from helpers import make_sample, make_scene
from relight.core import validate
from relight.data import (
    Manifest,
    SceneEntry,
    assemble_cross_batch,
    check_manifest,
    load_array,
    read_manifest,
    sample_pair,
    save_array,
    split_by_configuration,
    to_scene_record,
    write_manifest,
)
from relight.data.sampling import reverse_sample
from relight.errors import ConfigError, DataError, SchemaVersionError
from relight.synth.generate import generate_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    path = generate_dataset(2, 2, out, resolution=96, seed=17)
    return read_manifest(path)


class TestPersistence:
    def test_array_roundtrip_exact(self, tmp_path):
        arr = np.array([[1.7, 0.0, 3.25]] * 3, dtype=np.float32).reshape(3, 3, 1)[..., [0, 0, 0]]
        save_array(tmp_path / "x.npy", arr)
        back = load_array(tmp_path / "x.npy")
        assert back.dtype == np.float32
        assert np.array_equal(back, arr)
        assert 1.7 in back  # above-1 values survive untouched

    def test_missing_array_names_path(self, tmp_path):
        with pytest.raises(DataError, match="nope.npy"):
            load_array(tmp_path / "nope.npy")

    def test_generated_dataset_validates(self, dataset):
        assert check_manifest(dataset) == []
        for entry in dataset.scenes:
            assert validate(to_scene_record(dataset, entry)) == []

    def test_reload_keeps_product_identity(self, dataset):
        rec = to_scene_record(dataset, dataset.scenes[0])
        cap = rec.captures[0]
        prod = np.clip(cap.reflectance.data.astype(np.float64) * cap.shading.data.astype(np.float64), 0, 1)
        assert np.abs(prod - cap.image.data).max() <= 1e-5

    def test_regeneration_is_byte_identical(self, dataset, tmp_path):
        path = generate_dataset(2, 2, tmp_path, resolution=96, seed=17)
        first_root = dataset.root
        for f in sorted(Path(tmp_path).rglob("*")):
            if f.is_file():
                twin = Path(first_root) / f.relative_to(tmp_path)
                assert twin.read_bytes() == f.read_bytes(), f"{f} differs"

    def test_capture_counts(self, tmp_path):
        path = generate_dataset(3, 4, tmp_path / "c", resolution=96, seed=1)
        m = read_manifest(path)
        assert len(m.scenes) == 3
        assert all(len(s.captures) == 4 for s in m.scenes)
        npys = list((tmp_path / "c").rglob("image_*.npy"))
        assert len(npys) == 12

    def test_schema_mismatch_rejected(self, dataset, tmp_path):
        target = tmp_path / "bad.jsonl"
        lines = (Path(dataset.root) / "manifest.jsonl").read_text().splitlines()
        lines[0] = json.dumps({"schema_version": "relight-dataset/999"})
        target.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaVersionError):
            read_manifest(target)

    def test_check_manifest_flags_missing_file(self, tmp_path):
        path = generate_dataset(1, 1, tmp_path / "m", resolution=96, seed=2)
        m = read_manifest(path)
        victim = m.resolve(m.scenes[0].captures[0].shading_path)
        victim.unlink()
        assert any("missing file" in v for v in check_manifest(m))

    def test_manifest_roundtrip_equality(self, dataset, tmp_path):
        again = read_manifest(write_manifest(dataset, tmp_path / "copy.jsonl"))
        assert again == dataset  # root is excluded from comparison


def _configs_manifest(n: int) -> Manifest:
    return Manifest(scenes=tuple(SceneEntry(f"s{i}", i, i, ()) for i in range(n)))


class TestSplit:
    def test_reference_split(self):
        tr, va, te = split_by_configuration(_configs_manifest(72), (59 / 72, 3 / 72, 10 / 72))
        assert (len(tr.scenes), len(va.scenes), len(te.scenes)) == (59, 3, 10)

    def test_partition_property(self):
        m = _configs_manifest(29)
        parts = split_by_configuration(m, (0.6, 0.2, 0.2), seed=5)
        ids = [frozenset(s.configuration_id for s in p.scenes) for p in parts]
        assert sum(len(i) for i in ids) == 29
        assert frozenset().union(*ids) == {s.configuration_id for s in m.scenes}

    def test_all_in_train(self):
        tr, va, te = split_by_configuration(_configs_manifest(10), (1.0, 0.0, 0.0))
        assert len(tr.scenes) == 10 and not va.scenes and not te.scenes

    def test_deterministic_in_seed(self):
        m = _configs_manifest(40)
        a = split_by_configuration(m, (0.5, 0.25, 0.25), seed=9)
        b = split_by_configuration(m, (0.5, 0.25, 0.25), seed=9)
        assert all(x == y for x, y in zip(a, b))
        c = split_by_configuration(m, (0.5, 0.25, 0.25), seed=10)
        assert any(x != y for x, y in zip(a, c))

    def test_bad_ratios(self):
        with pytest.raises(ConfigError):
            split_by_configuration(_configs_manifest(10), (0.5, 0.2, 0.2))

    def test_too_few_configurations(self):
        with pytest.raises(DataError):
            split_by_configuration(_configs_manifest(2), (0.5, 0.3, 0.2))

    def test_scenes_follow_their_configuration(self):
        # two scenes per configuration: both must land in the same split
        scenes = tuple(SceneEntry(f"s{i}", i // 2, i, ()) for i in range(20))
        parts = split_by_configuration(Manifest(scenes=scenes), (0.5, 0.25, 0.25), seed=1)
        for p in parts:
            for s in p.scenes:
                twin = f"s{s.geometry_seed ^ 1}"
                assert any(t.scene_id == twin for t in p.scenes)


class TestPairSampling:
    def test_needs_two_captures(self, rng=np.random.default_rng(0)):
        scene = make_scene(rng, n_captures=1)
        with pytest.raises(DataError):
            sample_pair(scene, rng)

    def test_lights_always_distinct(self):
        rng = np.random.default_rng(1)
        scene = make_scene(rng, n_captures=4)
        for _ in range(200):
            s = sample_pair(scene, rng)
            assert s.original_light != s.target_light

    def test_ordered_pair_coverage(self):
        rng = np.random.default_rng(2)
        scene = make_scene(rng, h=8, w=8, n_captures=10)
        key = {id(c.image): i for i, c in enumerate(scene.captures)}
        seen = set()
        for _ in range(1000):
            s = sample_pair(scene, rng)
            seen.add((key[id(s.input_image)], key[id(s.target_image)]))
        assert all(i != j for i, j in seen)
        assert len(seen) >= 80  # of the 90 ordered pairs

    def test_sample_is_valid(self):
        rng = np.random.default_rng(3)
        scene = make_scene(rng, n_captures=3)
        assert validate(sample_pair(scene, rng)) == []


class TestCrossBatch:
    def test_reference_batch_size(self):
        rng = np.random.default_rng(4)
        samples = [make_sample(rng, h=8, w=8) for _ in range(9)]
        batch = assemble_cross_batch(samples)
        assert len(batch) == 18
        assert batch.inputs.shape == (18, 3, 8, 8)
        assert batch.reversed_flag.tolist() == [False] * 9 + [True] * 9

    def test_reversal_is_involution(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            s = make_sample(rng, h=8, w=8)
            back = reverse_sample(reverse_sample(s))
            assert np.array_equal(back.input_image.data, s.input_image.data)
            assert back.original_light == s.original_light
            assert back.target_light == s.target_light
            assert np.array_equal(back.gt_shading_ori.data, s.gt_shading_ori.data)

    def test_cross_half_mirrors_first_half(self):
        rng = np.random.default_rng(6)
        b0 = 5
        batch = assemble_cross_batch([make_sample(rng, h=8, w=8) for _ in range(b0)])
        assert torch.equal(batch.inputs[:b0], batch.targets[b0:])
        assert torch.equal(batch.targets[:b0], batch.inputs[b0:])
        assert torch.equal(batch.original_lights[:b0], batch.target_lights[b0:])
        assert torch.equal(batch.target_lights[:b0], batch.original_lights[b0:])
        assert torch.equal(batch.gt_reflectance[:b0], batch.gt_reflectance[b0:])
        assert torch.equal(batch.gt_shading_ori[:b0], batch.gt_shading_new[b0:])
        assert torch.equal(batch.gt_shading_new[:b0], batch.gt_shading_ori[b0:])

    def test_without_reversal(self):
        rng = np.random.default_rng(7)
        batch = assemble_cross_batch([make_sample(rng, h=8, w=8) for _ in range(3)], include_reversed=False)
        assert len(batch) == 3
        assert batch.reversed_flag.tolist() == [False] * 3

    def test_gt_optional_all_absent(self):
        rng = np.random.default_rng(8)
        samples = [make_sample(rng, h=8, w=8) for _ in range(2)]
        from dataclasses import replace

        bare = [replace(s, gt_reflectance=None, gt_shading_ori=None, gt_shading_new=None) for s in samples]
        batch = assemble_cross_batch(bare)
        assert batch.gt_reflectance is None and batch.gt_shading_ori is None and batch.gt_shading_new is None

    def test_gt_mixed_availability_rejected(self):
        rng = np.random.default_rng(9)
        from dataclasses import replace

        s1 = make_sample(rng, h=8, w=8)
        s2 = replace(make_sample(rng, h=8, w=8), gt_reflectance=None)
        with pytest.raises(DataError):
            assemble_cross_batch([s1, s2])

    def test_empty_and_inhomogeneous_rejected(self):
        rng = np.random.default_rng(10)
        with pytest.raises(DataError):
            assemble_cross_batch([])
        with pytest.raises(DataError):
            assemble_cross_batch([make_sample(rng, h=8, w=8), make_sample(rng, h=8, w=16)])
