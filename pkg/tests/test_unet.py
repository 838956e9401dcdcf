"""
Tests for the conditional denoiser U-Net.
"""

import numpy as np
import pytest

from lung_diffusion.core import Rng
from lung_diffusion.errors import ConfigError, ShapeError
from lung_diffusion.gradsuite import ProjectedFragment, jitter, tiny_unet_config
from lung_diffusion.models import UnetConfig
from lung_diffusion.nn import grad_check
from lung_diffusion.unet import DenoiseInput, DenoiserUnet, additive_skip_merge

T = 50


@pytest.fixture
def unet(tiny_config):
    return DenoiserUnet(tiny_config.unet, num_timesteps=T, rng=Rng(0).spawn("init"))


@pytest.fixture
def trained_unet(tiny_config):
    model = DenoiserUnet(tiny_config.unet, num_timesteps=T, rng=Rng(0).spawn("init"))
    jitter(model.params, Rng(0).spawn("jitter"), scale=0.2)
    return model


@pytest.fixture
def uncond_unet(tiny_config):
    config = tiny_config.unet.model_copy(update={"conditional": False, "attention_levels": None})
    return DenoiserUnet(config, num_timesteps=T, rng=Rng(0).spawn("init"))


@pytest.fixture
def z_t(np_rng):
    return np_rng.standard_normal((4, 4, 4, 4))


@pytest.fixture
def mask_latent(np_rng):
    return np_rng.uniform(0, 1, (1, 4, 4, 4))


class TestUnetConfig:
    """Tests for U-Net configuration validation."""

    def test_channels_double_and_cap(self):
        assert UnetConfig(levels=4, base_channels=16, max_channels=64).channels() == [16, 32, 64, 64]

    def test_default_attention_on_two_coarsest(self):
        assert UnetConfig(levels=3).resolved_attention_levels() == (1, 2)

    def test_unconditional_has_no_attention(self):
        assert UnetConfig(conditional=False).resolved_attention_levels() == ()
        with pytest.raises(ValueError, match="attention"):
            UnetConfig(conditional=False, attention_levels=(0,))

    def test_heads_divide_width(self):
        with pytest.raises(ValueError, match="heads"):
            UnetConfig(attention_width=10, heads=3)


class TestSkipMerge:
    """Tests for additive skip connections."""

    def test_zero_encoder_is_identity(self, np_rng):
        dec = np_rng.standard_normal((3, 2, 2, 2))
        np.testing.assert_array_equal(additive_skip_merge(dec, np.zeros_like(dec)), dec)

    def test_commutative(self, np_rng):
        a = np_rng.standard_normal((3, 2, 2, 2))
        b = np_rng.standard_normal((3, 2, 2, 2))
        assert np.array_equal(additive_skip_merge(a, b), additive_skip_merge(b, a))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            additive_skip_merge(np.zeros((3, 2, 2, 2)), np.zeros((6, 2, 2, 2)))

    def test_channel_count_unchanged_at_every_level(self, unet):
        for before, after in unet.skip_channels():
            assert before == after


class TestDenoise:
    """Tests for the denoiser forward pass."""

    def test_output_shape(self, trained_unet, z_t, mask_latent):
        assert trained_unet.denoise(DenoiseInput(z_t, 10, mask_latent=mask_latent)).shape == z_t.shape

    def test_fresh_model_predicts_zero(self, unet, z_t, mask_latent):
        v_hat = unet.denoise(DenoiseInput(z_t, 10, mask_latent=mask_latent))
        np.testing.assert_array_equal(v_hat, np.zeros_like(z_t))

    def test_deterministic(self, trained_unet, z_t, mask_latent):
        a = trained_unet.denoise(DenoiseInput(z_t, 10, mask_latent=mask_latent))
        b = trained_unet.denoise(DenoiseInput(z_t, 10, mask_latent=mask_latent))
        assert np.array_equal(a, b)

    def test_time_reaches_output(self, trained_unet, z_t, mask_latent):
        early = trained_unet.denoise(DenoiseInput(z_t, 1, mask_latent=mask_latent))
        late = trained_unet.denoise(DenoiseInput(z_t, T, mask_latent=mask_latent))
        assert np.max(np.abs(early - late)) > 0

    def test_context_reaches_output(self, trained_unet, z_t, mask_latent):
        context = trained_unet.embed_context(mask_latent)
        changed = context.copy()
        changed[0] += 1.0
        a = trained_unet.predict(z_t, 10, context=context, mask_latent=mask_latent)
        b = trained_unet.predict(z_t, 10, context=changed, mask_latent=mask_latent)
        assert np.max(np.abs(a - b)) > 0

    def test_conditional_requires_mask(self, unet, z_t):
        with pytest.raises(ConfigError, match="requires a mask"):
            unet.denoise(DenoiseInput(z_t, 10))

    def test_unconditional_rejects_mask(self, uncond_unet, z_t, mask_latent):
        with pytest.raises(ConfigError, match="does not accept"):
            uncond_unet.denoise(DenoiseInput(z_t, 10, mask_latent=mask_latent))

    def test_unconditional_runs_without_context(self, uncond_unet, z_t):
        assert uncond_unet.denoise(DenoiseInput(z_t, 10)).shape == z_t.shape
        assert uncond_unet.embed_context(None) is None

    def test_rejects_indivisible_latent(self, unet, np_rng):
        with pytest.raises(ShapeError, match="divisible"):
            unet.denoise(DenoiseInput(np_rng.standard_normal((4, 3, 4, 4)), 10, mask_latent=np.zeros((1, 3, 4, 4))))

    def test_rejects_wrong_channels(self, unet, mask_latent):
        with pytest.raises(ShapeError, match="channels"):
            unet.denoise(DenoiseInput(np.zeros((3, 4, 4, 4)), 10, mask_latent=mask_latent))

    @pytest.mark.parametrize("t", [0, T + 1])
    def test_rejects_timestep(self, unet, z_t, mask_latent, t):
        with pytest.raises(ValueError, match="timestep"):
            unet.denoise(DenoiseInput(z_t, t, mask_latent=mask_latent))


class TestUnetGradients:
    """Finite-difference check through the whole network."""

    def test_squared_output_gradient(self, np_rng):
        rng = Rng(9)
        model = DenoiserUnet(tiny_unet_config(), num_timesteps=1000, rng=rng.spawn("init"))
        jitter(model.params, rng.spawn("jitter"))
        mask_latent = np_rng.uniform(0, 1, (1, 4, 4, 4))

        def forward(inputs):
            v_hat, cache = model.forward(DenoiseInput(inputs["z_t"], 600, mask_latent=mask_latent))
            return v_hat, cache

        def backward(cache, g):
            grad_z, grad_context = model.backward(cache, g)
            assert grad_context is not None
            return {"z_t": grad_z}

        fragment = ProjectedFragment(model.params, forward, backward, rng.spawn("projection"))
        report = grad_check(fragment, {"z_t": np_rng.standard_normal((4, 4, 4, 4))}, max_entries=8, rng=rng)
        assert report.passed, report.failures
        assert len(report.checks) == len(model.params) + 1
