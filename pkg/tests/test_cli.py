"""
Tests for the lung-diffusion CLI.

Drives every command group through Typer's CliRunner on 16³ phantoms.
"""

import json
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from typer.testing import CliRunner

from lung_diffusion import __version__
from lung_diffusion.data import MANIFEST_NAME, read_volume, write_mask
from lung_diffusion.diffusion import DiffusionTrainer
from lung_diffusion.main import app
from lung_diffusion.models import ConditioningMode
from lung_diffusion.nn.gradcheck import GradCheckReport, TensorCheck

runner = CliRunner()


@pytest.fixture
def config_file(tmp_path: Path, tiny_config) -> Path:
    path = tmp_path / "run.json"
    path.write_text(tiny_config.to_json())
    return path


@pytest.fixture
def mask_file(tmp_path: Path) -> Path:
    labels = np.zeros((16, 16, 16), dtype=np.uint8)
    labels[4:12, 4:12, 4:12] = 1
    path = tmp_path / "mask.msk"
    write_mask(path, labels)
    return path


class TestVersionCommand:
    """Tests for the version command."""

    def test_version_displays_correctly(self):
        result = runner.invoke(app, ["version"])
        assert result.exit_code == 0
        assert "Lung Diffusion CLI" in result.stdout
        assert __version__ in result.stdout
        assert "build" in result.stdout


class TestConfigCommands:
    """Tests for config show and dump."""

    def test_show_default_profile(self):
        result = runner.invoke(app, ["config", "show"])
        assert result.exit_code == 0
        assert "64×64×64" in result.stdout
        assert "nodule+lung+texture" in result.stdout

    def test_show_mode_override(self):
        result = runner.invoke(app, ["config", "show", "--mode", "uncond"])
        assert result.exit_code == 0
        assert "uncond" in result.stdout

    def test_unknown_mode(self):
        result = runner.invoke(app, ["config", "show", "--mode", "lung-only"])
        assert result.exit_code == 1
        assert "unknown mode" in result.output

    def test_unknown_profile(self):
        result = runner.invoke(app, ["config", "show", "--profile", "huge"])
        assert result.exit_code == 1
        assert "unknown profile" in result.output

    def test_dump_round_trips(self, tmp_path, config_file):
        out = tmp_path / "dumped.json"
        result = runner.invoke(app, ["config", "dump", "--out", str(out), "--config", str(config_file), "--seed", "9"])
        assert result.exit_code == 0
        dumped = json.loads(out.read_text())
        assert dumped["seed"] == 9
        assert dumped["data"]["dims"] == [16, 16, 16]

    def test_invalid_config_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"diffusion": {"beta_start": 0.5, "beta_end": 0.1}}))
        result = runner.invoke(app, ["config", "show", "--config", str(path)])
        assert result.exit_code == 1
        assert "Error" in result.output


class TestGradcheckCommand:
    """Tests for the gradient suite command."""

    def test_layers_pass(self):
        result = runner.invoke(app, ["gradcheck", "--layers-only", "--max-entries", "4"])
        assert result.exit_code == 0
        assert "fragments within" in result.stdout

    @patch("lung_diffusion.cli.gradcheck.run_suite")
    def test_failure_exits_numerical(self, mock_run_suite):
        mock_run_suite.return_value = [
            GradCheckReport("linear", 1e-4, [TensorCheck("linear.w", 1e-9, 4)]),
            GradCheckReport("unet", 1e-4, [TensorCheck("unet.out.w", 0.3, 4)]),
        ]
        result = runner.invoke(app, ["gradcheck"])
        assert result.exit_code == 2
        assert "unet" in result.output


class TestPhantomCommand:
    """Tests for phantom generation."""

    def test_gen_writes_dataset(self, tmp_path, config_file):
        out = tmp_path / "phantoms"
        result = runner.invoke(app, ["phantom", "gen", "--n", "2", "--out", str(out), "--config", str(config_file), "-w", "1"])
        assert result.exit_code == 0
        assert (out / MANIFEST_NAME).exists()
        assert read_volume(out / "phantom_0001.vol").shape == (1, 16, 16, 16)
        assert (out / "phantom_0001.msk").exists()

    def test_gen_is_worker_invariant(self, tmp_path, config_file):
        for workers in ("1", "2"):
            runner.invoke(app, ["phantom", "gen", "--n", "2", "--out", str(tmp_path / workers), "--config", str(config_file), "-w", workers])
        a = read_volume(tmp_path / "1" / "phantom_0001.vol")
        b = read_volume(tmp_path / "2" / "phantom_0001.vol")
        assert np.array_equal(a, b)

    def test_gen_rejects_zero(self, tmp_path):
        result = runner.invoke(app, ["phantom", "gen", "--n", "0", "--out", str(tmp_path)])
        assert result.exit_code != 0


class TestSampleCommand:
    """Tests for mask/mode checks in the sample command."""

    def test_mask_in_unconditional_mode(self, tmp_path, config_file, mask_file):
        result = runner.invoke(
            app,
            [
                "sample", "--ckpt", str(tmp_path / "unet.ckpt"), "--vae-ckpt", str(tmp_path / "vae.ckpt"),
                "--mask", str(mask_file), "--mode", "uncond", "--config", str(config_file),
            ],
        )
        assert result.exit_code == 1
        assert "mode conflict" in result.output

    def test_conditional_mode_needs_mask(self, tmp_path, config_file):
        result = runner.invoke(
            app,
            ["sample", "--ckpt", str(tmp_path / "unet.ckpt"), "--vae-ckpt", str(tmp_path / "vae.ckpt"), "--config", str(config_file)],
        )
        assert result.exit_code == 1
        assert "requires a mask" in result.output

    def test_texture_sweep_needs_texture_mode(self, tmp_path, config_file, mask_file):
        result = runner.invoke(
            app,
            [
                "sample", "--ckpt", str(tmp_path / "unet.ckpt"), "--vae-ckpt", str(tmp_path / "vae.ckpt"),
                "--mask", str(mask_file), "--mode", "nodule", "--texture-sweep", "--config", str(config_file),
            ],
        )
        assert result.exit_code == 1
        assert "texture sweep" in result.output

    def test_mode_comes_from_checkpoint(self, tmp_path, tiny_config, config_file, mask_file):
        DiffusionTrainer(tiny_config.with_mode(ConditioningMode.UNCOND)).save(tmp_path / "unet.ckpt")
        result = runner.invoke(
            app,
            [
                "sample", "--ckpt", str(tmp_path / "unet.ckpt"), "--vae-ckpt", str(tmp_path / "vae.ckpt"),
                "--mask", str(mask_file), "--config", str(config_file),
            ],
        )
        assert result.exit_code == 1
        assert "mode conflict" in result.output

    def test_mode_flag_cross_checks_checkpoint(self, tmp_path, tiny_config, config_file, mask_file):
        DiffusionTrainer(tiny_config.with_mode(ConditioningMode.UNCOND)).save(tmp_path / "unet.ckpt")
        result = runner.invoke(
            app,
            [
                "sample", "--ckpt", str(tmp_path / "unet.ckpt"), "--vae-ckpt", str(tmp_path / "vae.ckpt"),
                "--mode", "nodule", "--mask", str(mask_file), "--config", str(config_file),
            ],
        )
        assert result.exit_code == 1
        assert "mode conflict" in result.output

    def test_unconditional_checkpoint_needs_no_mask(self, tmp_path, tiny_config, config_file):
        DiffusionTrainer(tiny_config.with_mode(ConditioningMode.UNCOND)).save(tmp_path / "unet.ckpt")
        result = runner.invoke(
            app,
            ["sample", "--ckpt", str(tmp_path / "unet.ckpt"), "--vae-ckpt", str(tmp_path / "vae.ckpt"), "--config", str(config_file)],
        )
        # fails later, on the missing VAE checkpoint
        assert result.exit_code == 1
        assert "requires a mask" not in result.output
        assert "mode conflict" not in result.output

    def test_missing_checkpoint(self, tmp_path, config_file, mask_file):
        result = runner.invoke(
            app,
            [
                "sample", "--ckpt", str(tmp_path / "unet.ckpt"), "--vae-ckpt", str(tmp_path / "vae.ckpt"),
                "--mask", str(mask_file), "--config", str(config_file),
            ],
        )
        assert result.exit_code == 1


class TestEvalCommands:
    """Tests for the evaluation reports."""

    def test_msssim_writes_report(self, tmp_path, phantom_dir, config_file):
        out = tmp_path / "msssim.json"
        result = runner.invoke(app, ["eval", "msssim", "--set", str(phantom_dir), "--pairs", "3", "--out", str(out), "--config", str(config_file)])
        assert result.exit_code == 0
        report = json.loads(out.read_text())
        assert report["metric"] == "ms_ssim"
        assert report["pairs"] == 3
        assert 0.0 <= report["value"] <= 1.0

    def test_fid_of_set_against_itself(self, tmp_path, phantom_dir, config_file):
        out = tmp_path / "fid.json"
        result = runner.invoke(app, ["eval", "fid", "--real", str(phantom_dir), "--synth", str(phantom_dir), "--out", str(out), "--config", str(config_file)])
        assert result.exit_code == 0
        report = json.loads(out.read_text())
        assert report["value"] == pytest.approx(0.0, abs=1e-6)
        assert "FID" in result.stdout

    def test_missing_set(self, tmp_path, config_file):
        result = runner.invoke(app, ["eval", "msssim", "--set", str(tmp_path / "absent"), "--config", str(config_file)])
        assert result.exit_code == 1


@pytest.mark.slow
class TestPipeline:
    """Phantoms through VAE and U-Net training to sampling and evaluation."""

    def test_end_to_end(self, tmp_path, config_file):
        phantoms = tmp_path / "phantoms"
        vae_dir = tmp_path / "vae"
        unet_dir = tmp_path / "diffusion"
        samples = tmp_path / "samples"
        common = ["--config", str(config_file), "-w", "2"]

        steps = [
            ["phantom", "gen", "--n", "4", "--out", str(phantoms)],
            ["vae", "train", "--data", str(phantoms), "--out", str(vae_dir), "--steps", "2"],
            [
                "diffusion", "train", "--data", str(phantoms), "--vae-ckpt", str(vae_dir / "vae.ckpt"),
                "--out", str(unet_dir), "--steps", "2", "--dump-encoded",
            ],
            [
                "sample", "--ckpt", str(unet_dir / "unet.ckpt"), "--vae-ckpt", str(vae_dir / "vae.ckpt"),
                "--mask", str(phantoms / "phantom_0000.msk"), "--n", "2", "--out", str(samples),
            ],
            ["eval", "msssim", "--set", str(samples), "--pairs", "1"],
        ]
        for args in steps:
            result = runner.invoke(app, args + common)
            assert result.exit_code == 0, result.output

        codebook = json.loads((unet_dir / "encoded_codebook.json").read_text())
        assert codebook["mode"] == "nodule+lung+texture"
        assert set(codebook["observed"]) <= set(codebook["codebook"])
        assert read_volume(samples / "sample_0001.vol").shape == (1, 16, 16, 16)

        rerun = tmp_path / "rerun"
        result = runner.invoke(
            app,
            [
                "sample", "--ckpt", str(unet_dir / "unet.ckpt"), "--vae-ckpt", str(vae_dir / "vae.ckpt"),
                "--mask", str(phantoms / "phantom_0000.msk"), "--n", "2", "--out", str(rerun), "-w", "1",
                "--config", str(config_file),
            ],
        )
        assert result.exit_code == 0
        assert np.array_equal(read_volume(samples / "sample_0001.vol"), read_volume(rerun / "sample_0001.vol"))
