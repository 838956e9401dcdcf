"""
Tests for procedural phantoms, binary volume/mask files and manifests.
"""

import numpy as np
import pytest

from lung_diffusion.core import Rng
from lung_diffusion.data import (
    MANIFEST_NAME,
    build_manifest,
    generate_dataset,
    generate_phantom,
    load_manifest,
    nodule_intensity,
    phantom_seed,
    read_mask,
    read_volume,
    write_mask,
    write_volume,
)
from lung_diffusion.data.io import decode_volume, encode_volume
from lung_diffusion.errors import ConfigError, FormatError
from lung_diffusion.models import DatasetManifest, ManifestRecord, NoduleRecord, PhantomConfig

CENTER = (16, 16, 9)


@pytest.fixture
def steady_config():
    """32³ phantoms without geometric jitter, so a fixed nodule always fits the left lung."""
    return PhantomConfig(dims=(32, 32, 32), nodule_radius=(1.5, 3.0), nodule_count=(0, 2), jitter=0.0)


def _with_nodule(config, texture, radius=2.0):
    nodule = NoduleRecord(center=CENTER, radius=radius, texture=texture)
    return generate_phantom(config, Rng(3), nodules=[nodule])


class TestPhantomConfig:
    """Tests for phantom parameter validation."""

    def test_rejects_small_dims(self):
        with pytest.raises(ValueError, match=">= 8"):
            PhantomConfig(dims=(4, 32, 32))

    def test_rejects_oversized_nodules(self):
        with pytest.raises(ValueError, match="nodule radius"):
            PhantomConfig(dims=(32, 32, 32), nodule_radius=(2.0, 6.0))

    def test_rejects_inverted_count_range(self):
        with pytest.raises(ValueError, match="count"):
            PhantomConfig(nodule_count=(3, 1))


class TestGeneratePhantom:
    """Tests for phantom geometry and intensities."""

    def test_shapes_and_range(self, small_phantom_config):
        phantom = generate_phantom(small_phantom_config, Rng(1))
        assert phantom.volume.shape == (1, 32, 32, 32)
        assert phantom.mask.shape == (32, 32, 32)
        assert phantom.mask.dtype == np.uint8
        assert phantom.volume.min() >= -1.0 and phantom.volume.max() <= 1.0

    def test_no_nodules_means_lung_and_background_only(self, small_phantom_config):
        config = small_phantom_config.model_copy(update={"nodule_count": (0, 0)})
        phantom = generate_phantom(config, Rng(2))
        assert set(np.unique(phantom.mask).tolist()) <= {0, 1}
        assert phantom.nodules == []

    def test_deterministic(self, small_phantom_config):
        a = generate_phantom(small_phantom_config, Rng(9))
        b = generate_phantom(small_phantom_config, Rng(9))
        assert np.array_equal(a.volume, b.volume)
        assert np.array_equal(a.mask, b.mask)
        assert a.nodules == b.nodules

    def test_seeds_differ(self, small_phantom_config):
        a = generate_phantom(small_phantom_config, Rng(1))
        b = generate_phantom(small_phantom_config, Rng(2))
        assert not np.array_equal(a.volume, b.volume)

    def test_solid_nodule_centre(self, steady_config):
        phantom = _with_nodule(steady_config, texture=5)
        assert phantom.volume[(0, *CENTER)] == 0.3
        assert phantom.mask[CENTER] == 6

    def test_non_solid_nodule_centre(self, steady_config):
        phantom = _with_nodule(steady_config, texture=1)
        assert phantom.volume[(0, *CENTER)] == pytest.approx(-0.5)
        assert nodule_intensity(steady_config, 1) == pytest.approx(-0.5)

    def test_nodule_voxels_brighter_than_lung(self, steady_config):
        phantom = _with_nodule(steady_config, texture=1)
        nodule_voxels = phantom.volume[0][phantom.mask >= 2]
        assert nodule_voxels.size > 0
        assert np.all(nodule_voxels > steady_config.lung_intensity)

    def test_lung_interior_has_lung_intensity(self, steady_config):
        config = steady_config.model_copy(update={"nodule_count": (0, 0)})
        phantom = generate_phantom(config, Rng(4))
        assert phantom.volume[(0, *CENTER)] == pytest.approx(config.lung_intensity, abs=1e-3)
        # lung voxels are at least half lung after edge smoothing
        lung = phantom.volume[0][phantom.mask == 1]
        halfway = config.lung_intensity + 0.5 * (config.body_intensity - config.lung_intensity)
        assert lung.max() <= halfway + 1e-9

    def test_texture_monotone(self, steady_config):
        means = []
        for texture in range(1, 6):
            phantom = _with_nodule(steady_config, texture=texture, radius=2.5)
            means.append(phantom.volume[0][phantom.mask >= 2].mean())
        assert all(a < b for a, b in zip(means, means[1:]))

    def test_explicit_nodule_must_fit(self, steady_config):
        outside = NoduleRecord(center=(1, 1, 1), radius=2.0, texture=3)
        with pytest.raises(ConfigError, match="does not fit"):
            generate_phantom(steady_config, Rng(0), nodules=[outside])

    def test_placed_nodules_are_separated(self, small_phantom_config):
        config = small_phantom_config.model_copy(update={"nodule_count": (3, 3)})
        for seed in range(5):
            nodules = generate_phantom(config, Rng(seed)).nodules
            for i, a in enumerate(nodules):
                for b in nodules[i + 1:]:
                    gap = np.linalg.norm(np.subtract(a.center, b.center))
                    assert gap >= a.radius + b.radius + 1.0


class TestVolumeFiles:
    """Tests for the binary volume and mask formats."""

    def test_volume_round_trip(self, tmp_path, np_rng):
        v = np_rng.standard_normal((4, 8, 8, 8)).astype(np.float32).astype(np.float64)
        write_volume(tmp_path / "a.vol", v)
        assert np.array_equal(read_volume(tmp_path / "a.vol"), v)

    def test_header_layout(self):
        data = encode_volume(np.zeros((1, 2, 3, 4)))
        assert data[:8] == b"LANDVOL1"
        assert len(data) == 8 + 4 + 16 + 4 * 24

    def test_truncated(self):
        data = encode_volume(np.zeros((1, 2, 2, 2)))
        with pytest.raises(FormatError, match="expected 60 bytes") as exc_info:
            decode_volume(data[:-4])
        assert exc_info.value.offset == 56

    def test_bad_magic(self):
        data = b"XXXXXXXX" + encode_volume(np.zeros((1, 2, 2, 2)))[8:]
        with pytest.raises(FormatError, match="bad magic"):
            decode_volume(data)

    def test_zero_dim(self):
        data = bytearray(encode_volume(np.zeros((1, 2, 2, 2))))
        data[12:16] = (0).to_bytes(4, "little")
        with pytest.raises(FormatError, match="dim 0"):
            decode_volume(bytes(data))

    def test_dims_exceed_payload(self):
        data = bytearray(encode_volume(np.zeros((1, 2, 2, 2))))
        data[16:20] = (1000).to_bytes(4, "little")
        with pytest.raises(FormatError, match="truncated"):
            decode_volume(bytes(data))

    def test_mask_round_trip(self, tmp_path, np_rng):
        labels = np_rng.integers(0, 7, (4, 5, 6)).astype(np.uint8)
        write_mask(tmp_path / "a.msk", labels)
        assert np.array_equal(read_mask(tmp_path / "a.msk"), labels)

    def test_mask_rejects_invalid_label(self, tmp_path):
        labels = np.zeros((2, 2, 2), dtype=np.uint8)
        write_mask(tmp_path / "a.msk", labels)
        data = bytearray((tmp_path / "a.msk").read_bytes())
        data[-1] = 9
        (tmp_path / "a.msk").write_bytes(bytes(data))
        with pytest.raises(FormatError, match="invalid mask label"):
            read_mask(tmp_path / "a.msk")


class TestManifest:
    """Tests for dataset generation and manifests."""

    def test_generate_writes_triples(self, phantom_dir):
        manifest = load_manifest(phantom_dir)
        assert len(manifest) == 4
        assert (phantom_dir / MANIFEST_NAME).exists()
        for record in manifest:
            assert manifest.resolve(record.volume_path).exists()
            assert manifest.resolve(record.mask_path).exists()
        assert [r.volume_path for r in manifest] == [f"phantom_{i:04d}.vol" for i in range(4)]

    def test_worker_count_does_not_change_output(self, tmp_path, tiny_config):
        one = generate_dataset(tmp_path / "one", tiny_config.data, 3, seed=5, workers=1)
        three = generate_dataset(tmp_path / "three", tiny_config.data, 3, seed=5, workers=3)
        assert [r.model_dump() for r in one] == [r.model_dump() for r in three]
        for record in one:
            assert (tmp_path / "one" / record.volume_path).read_bytes() == (
                tmp_path / "three" / record.volume_path
            ).read_bytes()

    def test_phantom_seeds_are_distinct(self):
        seeds = {phantom_seed(0, i) for i in range(100)}
        assert len(seeds) == 100

    def test_build_manifest_matches_generated(self, phantom_dir):
        (phantom_dir / MANIFEST_NAME).unlink()
        built = build_manifest(phantom_dir)
        assert [r.volume_path for r in built] == [f"phantom_{i:04d}.vol" for i in range(4)]
        assert all(r.mask_path is not None for r in built)

    def test_empty_directory(self, tmp_path):
        assert len(build_manifest(tmp_path)) == 0

    def test_orphan_volume(self, phantom_dir):
        (phantom_dir / "phantom_0002.msk").unlink()
        with pytest.raises(FormatError, match="phantom_0002.vol"):
            build_manifest(phantom_dir)

    def test_round_trip_preserves_fields(self, tmp_path):
        record = ManifestRecord(
            volume_path="a.vol",
            mask_path="a.msk",
            seed=12,
            nodules=[NoduleRecord(center=(1, 2, 3), radius=1.5, texture=4)],
            config_hash="f" * 64,
            build_id="v0.1.0",
        )
        DatasetManifest([record]).save(tmp_path / "m.jsonl")
        loaded = DatasetManifest.load(tmp_path / "m.jsonl")
        assert loaded.records == [record]
        assert loaded.root == tmp_path

    def test_rejects_duplicate_paths(self):
        record = ManifestRecord(volume_path="a.vol", seed=0)
        with pytest.raises(FormatError, match="duplicate"):
            DatasetManifest([record, record])

    def test_rejects_invalid_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"volume_path": "a.vol", "seed": 0}\nnot json\n')
        with pytest.raises(FormatError, match="line 2"):
            DatasetManifest.load(path)
