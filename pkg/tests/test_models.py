"""
Tests for configuration models, config hashes and dataset records.
"""

import json

import pytest
from pydantic import ValidationError

from lung_diffusion.errors import ConfigError
from lung_diffusion.models import (
    ConditioningMode,
    DiffusionConfig,
    ManifestRecord,
    NoduleRecord,
    PhantomConfig,
    RunConfig,
    config_hash,
    unet_config_hash,
    vae_config_hash,
)


class TestRunConfig:
    """Tests for the top-level configuration."""

    def test_desk_profile_is_valid(self):
        config = RunConfig.desk()
        assert config.data.dims == (64, 64, 64)
        assert config.mode == ConditioningMode.NODULE_LUNG_TEXTURE
        assert config.unet.conditional

    def test_full_profile(self):
        config = RunConfig.full_scale()
        assert config.data.dims == (256, 256, 256)
        assert config.unet.levels == 5

    def test_json_round_trip(self, tmp_path, tiny_config):
        path = tmp_path / "run.json"
        path.write_text(tiny_config.to_json())
        assert RunConfig.from_json_file(path) == tiny_config

    def test_missing_sections_take_defaults(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 42}))
        config = RunConfig.from_json_file(path)
        assert config.seed == 42
        assert config.vae == RunConfig().vae

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            RunConfig.from_json_file(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{seed: 1")
        with pytest.raises(ConfigError, match="not valid JSON"):
            RunConfig.from_json_file(path)

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="invalid configuration"):
            RunConfig.from_dict({"diffusion": {"timesteps": 10}})

    def test_mode_must_match_unet(self):
        with pytest.raises(ValidationError, match="conflicts"):
            RunConfig(mode=ConditioningMode.UNCOND)

    @pytest.mark.parametrize("mode", list(ConditioningMode))
    def test_with_mode_keeps_config_valid(self, tiny_config, mode):
        config = tiny_config.with_mode(mode)
        assert config.mode == mode
        assert config.unet.conditional == mode.conditional
        assert config.unet.input_channels() == (5 if mode.conditional else 4)

    def test_with_seed(self, tiny_config):
        assert tiny_config.with_seed(None) is tiny_config
        assert tiny_config.with_seed(99).seed == 99

    def test_frozen(self, tiny_config):
        with pytest.raises(ValidationError):
            tiny_config.seed = 3

    def test_seed_range(self):
        with pytest.raises(ValidationError):
            RunConfig(seed=-1)


class TestSections:
    """Tests for section-level validation."""

    def test_betas_ordered(self):
        with pytest.raises(ValidationError, match="beta_start"):
            DiffusionConfig(beta_start=0.02, beta_end=1e-4)

    def test_small_dims_rejected(self):
        with pytest.raises(ValidationError, match=">= 8"):
            PhantomConfig(dims=(4, 64, 64))

    def test_phantom_seed_comes_from_run_seed(self):
        with pytest.raises(ValidationError, match="seed"):
            PhantomConfig(seed=3)

    def test_nodule_radius_below_lung_axis(self):
        with pytest.raises(ValidationError, match="lung minor axis"):
            PhantomConfig(dims=(16, 16, 16), nodule_radius=(1.0, 4.0))

    def test_nodule_count_range(self):
        with pytest.raises(ValidationError, match="nodule count"):
            PhantomConfig(nodule_count=(3, 1))

    def test_batch_size_is_one(self):
        with pytest.raises(ValidationError):
            RunConfig.from_dict({"train": {"batch_size": 2}})


class TestConfigHash:
    """Tests for checkpoint-binding hashes."""

    def test_stable_and_hex(self, tiny_config):
        digest = config_hash(tiny_config)
        assert digest == config_hash(tiny_config)
        assert len(digest) == 64
        int(digest, 16)

    def test_vae_hash_ignores_diffusion(self, tiny_config):
        other = tiny_config.model_copy(update={"diffusion": DiffusionConfig(num_timesteps=20)})
        assert vae_config_hash(other) == vae_config_hash(tiny_config)
        assert unet_config_hash(other) != unet_config_hash(tiny_config)

    def test_unet_hash_covers_mode(self, tiny_config):
        other = tiny_config.with_mode(ConditioningMode.NODULE_LUNG)
        assert unet_config_hash(other) != unet_config_hash(tiny_config)

    def test_unet_hash_ignores_seed(self, tiny_config):
        assert unet_config_hash(tiny_config.with_seed(123)) == unet_config_hash(tiny_config)


class TestRecords:
    """Tests for dataset record models."""

    def test_nodule_texture_range(self):
        with pytest.raises(ValidationError):
            NoduleRecord(center=(1, 2, 3), radius=2.0, texture=6)

    def test_nodule_radius_positive(self):
        with pytest.raises(ValidationError):
            NoduleRecord(center=(1, 2, 3), radius=0.0, texture=3)

    def test_manifest_record_defaults(self):
        record = ManifestRecord(volume_path="p.vol", seed=0)
        assert record.mask_path is None
        assert record.nodules == []

    def test_manifest_record_rejects_extra(self):
        with pytest.raises(ValidationError):
            ManifestRecord(volume_path="p.vol", seed=0, spacing=1.0)
