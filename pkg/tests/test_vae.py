"""
Tests for the 3D VAE, its loss terms, latent statistics and trainer.
"""

import json
from unittest.mock import patch

import numpy as np
import pytest

from lung_diffusion.core import Rng
from lung_diffusion.data import generate_phantom
from lung_diffusion.errors import ConfigError, NumericalError, ShapeError
from lung_diffusion.models import LatentStats, VaeConfig
from lung_diffusion.nn import FeaturePyramid
from lung_diffusion.vae import (
    VAE,
    PatchDiscriminator,
    VaeTrainer,
    adversarial_losses,
    destandardize,
    kl_loss,
    latent_stats,
    load_vae,
    lsgan_losses,
    mae_loss,
    perceptual_loss,
    reparameterize,
    standardize,
)
from lung_diffusion.vae.trainer import CHECKPOINT_NAME, LOG_NAME


@pytest.fixture
def vae(tiny_config):
    return VAE(tiny_config.vae, Rng(0).spawn("vae"))


@pytest.fixture
def volumes(tiny_config):
    return [generate_phantom(tiny_config.data, Rng(i)).volume for i in range(2)]


class _ConstantDiscriminator:
    """Emits fixed logits for real and fake inputs."""

    def __init__(self, real, fake):
        self.values = {"real": real, "fake": fake}

    def forward(self, x):
        key = "real" if x[0, 0, 0, 0] > 0 else "fake"
        return np.full((1, 2, 2, 2), self.values[key]), None


class TestVaeConfig:
    """Tests for architecture validation."""

    def test_levels_fix_compression(self):
        with pytest.raises(ValueError, match="compression"):
            VaeConfig(levels=2, widths=(8, 8))

    def test_widths_per_level(self):
        with pytest.raises(ValueError, match="widths"):
            VaeConfig(widths=(8, 8))

    def test_groups_divide_widths(self):
        with pytest.raises(ValueError, match="group"):
            VaeConfig(widths=(6, 12, 12), groups=4)


class TestVaeShapes:
    """Tests for encoder/decoder shapes."""

    def test_encode_compresses_four_times(self, vae, np_rng):
        mu, logvar = vae.encode(np_rng.uniform(-1, 1, (1, 32, 32, 32)))
        assert mu.shape == (4, 8, 8, 8)
        assert logvar.shape == (4, 8, 8, 8)

    def test_decode_expands_four_times(self, vae, np_rng):
        x_hat = vae.decode(np_rng.standard_normal((4, 4, 4, 4)))
        assert x_hat.shape == (1, 16, 16, 16)
        assert np.all(np.abs(x_hat) <= 1.0)

    def test_encode_is_deterministic(self, vae, np_rng):
        x = np_rng.uniform(-1, 1, (1, 16, 16, 16))
        a = vae.encode(x)
        b = vae.encode(x)
        assert np.array_equal(a.mu, b.mu) and np.array_equal(a.logvar, b.logvar)

    def test_latent_shape(self, vae):
        assert vae.latent_shape((64, 64, 64)) == (4, 16, 16, 16)

    def test_rejects_indivisible_input(self, vae):
        with pytest.raises(ShapeError, match="divisible"):
            vae.encode(np.zeros((1, 18, 16, 16)))

    def test_rejects_multichannel_input(self, vae):
        with pytest.raises(ShapeError, match="one channel"):
            vae.encode(np.zeros((2, 16, 16, 16)))

    def test_rejects_wrong_latent_channels(self, vae):
        with pytest.raises(ShapeError, match="channels"):
            vae.decode(np.zeros((3, 4, 4, 4)))


class TestReparameterize:
    """Tests for the reparameterization trick."""

    def test_vanishing_variance(self, np_rng):
        mu = np_rng.standard_normal((4, 2, 2, 2))
        z, _ = reparameterize(mu, np.full(mu.shape, -30.0), Rng(3))
        np.testing.assert_allclose(z, mu, atol=1e-5)

    def test_unit_posterior_returns_noise(self):
        shape = (4, 2, 2, 2)
        z, eps = reparameterize(np.zeros(shape), np.zeros(shape), Rng(3))
        np.testing.assert_array_equal(z, eps)
        np.testing.assert_array_equal(eps, Rng(3).normal(shape))

    def test_sample_variance(self):
        shape = (1, 10, 10, 100)
        z, _ = reparameterize(np.zeros(shape), np.zeros(shape), Rng(11))
        assert z.var() == pytest.approx(1.0, abs=0.05)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            reparameterize(np.zeros((4, 2, 2, 2)), np.zeros((4, 2, 2, 1)), Rng(0))


class TestLosses:
    """Tests for the individual VAE loss terms."""

    def test_mae_zero_for_perfect_reconstruction(self, np_rng):
        x = np_rng.standard_normal((1, 4, 4, 4))
        value, _ = mae_loss(x, x.copy())
        assert value == 0.0

    def test_mae_value(self):
        value, grad = mae_loss(np.zeros((1, 1, 1, 2)), np.array([[[[1.0, -3.0]]]]))
        assert value == 2.0
        np.testing.assert_array_equal(grad, [[[[0.5, -0.5]]]])

    def test_kl_standard_normal_is_zero(self):
        assert kl_loss(np.zeros((4, 2, 2, 2)), np.zeros((4, 2, 2, 2))) == 0.0

    def test_kl_unit_shift(self):
        assert kl_loss(np.ones((1, 1, 1, 1)), np.zeros((1, 1, 1, 1))) == pytest.approx(0.5)

    def test_perceptual_identical_is_zero(self, np_rng):
        x = np_rng.uniform(-1, 1, (1, 8, 8, 8))
        assert perceptual_loss(x, x.copy(), FeaturePyramid((4, 4), seed=0)) == 0.0

    def test_perceptual_is_symmetric(self, np_rng):
        extractor = FeaturePyramid((4, 4), seed=0)
        x = np_rng.uniform(-1, 1, (1, 8, 8, 8))
        y = np_rng.uniform(-1, 1, (1, 8, 8, 8))
        assert perceptual_loss(x, y, extractor) == pytest.approx(perceptual_loss(y, x, extractor))
        assert perceptual_loss(x, y, extractor) > 0

    def test_lsgan_perfect_discriminator(self):
        d_loss, g_loss = lsgan_losses(np.ones(8), np.zeros(8))
        assert d_loss == 0.0
        assert g_loss == 0.5

    def test_lsgan_undecided_discriminator(self):
        d_loss, g_loss = lsgan_losses(np.full(8, 0.5), np.full(8, 0.5))
        assert d_loss == pytest.approx(0.25)
        assert g_loss == pytest.approx(0.125)

    def test_adversarial_losses_use_discriminator(self):
        disc = _ConstantDiscriminator(real=1.0, fake=0.0)
        d_loss, g_loss = adversarial_losses(np.ones((1, 4, 4, 4)), -np.ones((1, 4, 4, 4)), disc)
        assert (d_loss, g_loss) == (0.0, 0.5)

    def test_discriminator_emits_patch_logits(self, np_rng):
        disc = PatchDiscriminator((4, 4, 4), Rng(0))
        logits, _ = disc.forward(np_rng.uniform(-1, 1, (1, 16, 16, 16)))
        assert logits.shape == (1, 2, 2, 2)


class TestLatentStats:
    """Tests for latent standardization."""

    def test_identical_latents_hit_floor(self):
        z = np.ones((4, 2, 2, 2))
        stats = latent_stats([z, z.copy()])
        assert stats.mean == [1.0] * 4
        assert stats.std == [1e-6] * 4

    def test_standardized_latents_are_unit(self, np_rng):
        latents = [3.0 + 2.0 * np_rng.standard_normal((4, 4, 4, 4)) for _ in range(3)]
        stats = latent_stats(latents)
        again = latent_stats([standardize(z, stats) for z in latents])
        np.testing.assert_allclose(again.mean, 0.0, atol=1e-12)
        np.testing.assert_allclose(again.std, 1.0, atol=1e-12)

    def test_destandardize_inverts(self, np_rng):
        stats = LatentStats(mean=[0.1, 0.2, 0.3, 0.4], std=[1.0, 2.0, 3.0, 4.0])
        z = np_rng.standard_normal((4, 2, 2, 2))
        np.testing.assert_allclose(destandardize(standardize(z, stats), stats), z, atol=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="empty"):
            latent_stats([])

    def test_rejects_single_latent(self):
        with pytest.raises(ValueError, match="at least 2"):
            latent_stats([np.ones((4, 2, 2, 2))])

    def test_rejects_channel_mismatch(self, np_rng):
        stats = LatentStats(mean=[0.0] * 4, std=[1.0] * 4)
        with pytest.raises(ShapeError):
            standardize(np.zeros((3, 2, 2, 2)), stats)


class TestVaeTrainer:
    """Tests for VAE training steps, checkpoints and resume."""

    def test_warmup_skips_adversarial_terms(self, tiny_config, volumes, tmp_path):
        trainer = VaeTrainer(tiny_config)
        entries = trainer.fit(volumes, steps=3, out_dir=tmp_path)
        assert [e.step for e in entries] == [1, 2, 3]
        assert entries[0].adv_g == 0.0 and entries[0].adv_d == 0.0
        assert entries[2].adv_d > 0.0

    def test_discriminator_frozen_during_warmup(self, tiny_config, volumes):
        trainer = VaeTrainer(tiny_config)
        before = trainer.discriminator.params.copy_values()
        trainer.train_step(volumes[0], Rng(0))
        for name, value in before.items():
            assert np.array_equal(trainer.discriminator.params[name], value)

    def test_zero_lr_leaves_parameters(self, tiny_config, volumes):
        config = tiny_config.model_copy(update={"train": tiny_config.train.model_copy(update={"lr_vae": 0.0})})
        trainer = VaeTrainer(config)
        before = trainer.vae.params.copy_values()
        breakdown = trainer.train_step(volumes[0], Rng(0))
        assert breakdown.mae > 0
        for name, value in before.items():
            assert np.array_equal(trainer.vae.params[name], value)

    def test_non_finite_input_is_rejected(self, tiny_config):
        trainer = VaeTrainer(tiny_config)
        x = np.zeros((1, 16, 16, 16))
        x[0, 0, 0, 0] = np.nan
        with pytest.raises(NumericalError):
            trainer.train_step(x, Rng(0))

    @patch("lung_diffusion.vae.trainer.lsgan_losses", return_value=(float("nan"), 0.0))
    def test_discriminator_failure_leaves_both_networks(self, mock_lsgan, tiny_config, volumes):
        config = tiny_config.model_copy(
            update={"vae": tiny_config.vae.model_copy(update={"adv_warmup_steps": 0})}
        )
        trainer = VaeTrainer(config)
        vae_before = trainer.vae.params.copy_values()
        disc_before = trainer.discriminator.params.copy_values()
        with pytest.raises(NumericalError, match="adv_d"):
            trainer.train_step(volumes[0], Rng(0))
        assert mock_lsgan.called
        assert trainer.step == 0
        for name, value in vae_before.items():
            assert np.array_equal(trainer.vae.params[name], value)
        for name, value in disc_before.items():
            assert np.array_equal(trainer.discriminator.params[name], value)

    def test_log_and_checkpoint_written(self, tiny_config, volumes, tmp_path):
        VaeTrainer(tiny_config).fit(volumes, steps=2, out_dir=tmp_path)
        lines = (tmp_path / LOG_NAME).read_text().splitlines()
        assert [json.loads(l)["step"] for l in lines] == [1, 2]
        assert (tmp_path / CHECKPOINT_NAME).exists()

    def test_resume_continues_identically(self, tiny_config, volumes, tmp_path):
        straight = VaeTrainer(tiny_config)
        expected = straight.fit(volumes, steps=4, out_dir=tmp_path / "straight")

        first = VaeTrainer(tiny_config)
        first.fit(volumes, steps=2, out_dir=tmp_path / "resumed")
        second = VaeTrainer(tiny_config)
        assert second.resume(tmp_path / "resumed")
        assert second.step == 2
        continued = second.fit(volumes, steps=4, out_dir=tmp_path / "resumed")
        assert [e.model_dump() for e in continued] == [e.model_dump() for e in expected[2:]]
        for name in straight.vae.params:
            assert np.array_equal(straight.vae.params[name], second.vae.params[name])

    def test_resume_without_checkpoint(self, tiny_config, tmp_path):
        assert not VaeTrainer(tiny_config).resume(tmp_path)

    def test_load_vae_matches_trainer(self, tiny_config, volumes, tmp_path):
        trainer = VaeTrainer(tiny_config)
        trainer.fit(volumes, steps=2, out_dir=tmp_path)
        vae = load_vae(tmp_path / CHECKPOINT_NAME, tiny_config)
        assert np.array_equal(vae.reconstruct(volumes[0]), trainer.vae.reconstruct(volumes[0]))

    def test_load_vae_rejects_other_config(self, tiny_config, volumes, tmp_path):
        VaeTrainer(tiny_config).fit(volumes, steps=1, out_dir=tmp_path)
        other = tiny_config.model_copy(update={"vae": tiny_config.vae.model_copy(update={"w_kl": 0.5})})
        with pytest.raises(ConfigError):
            load_vae(tmp_path / CHECKPOINT_NAME, other)

    @pytest.mark.slow
    def test_overfits_single_volume(self, tiny_config, volumes, tmp_path):
        config = tiny_config.model_copy(
            update={
                "vae": tiny_config.vae.model_copy(update={"w_adv": 0.0, "w_lpips": 0.0}),
                "train": tiny_config.train.model_copy(update={"lr_vae": 3e-3, "checkpoint_every": 1000}),
            }
        )
        entries = VaeTrainer(config).fit(volumes[:1], steps=150, out_dir=tmp_path)
        first = np.mean([e.mae for e in entries[:10]])
        last = np.mean([e.mae for e in entries[-10:]])
        assert last < 0.5 * first
