"""
Pytest configuration and shared fixtures for lung diffusion tests.
"""

from pathlib import Path

import numpy as np
import pytest

from lung_diffusion.core import Rng
from lung_diffusion.data import generate_dataset
from lung_diffusion.models import (
    DiffusionConfig,
    PhantomConfig,
    RunConfig,
    TrainConfig,
    UnetConfig,
    VaeConfig,
)


@pytest.fixture
def rng():
    """Seeded root stream."""
    return Rng(1234)


@pytest.fixture
def np_rng():
    """Plain numpy generator for test data that is not part of any contract."""
    return np.random.default_rng(20240611)


@pytest.fixture
def small_phantom_config():
    """
    32³ phantoms: large enough for nodules to fit inside the lungs.

    Returns:
        PhantomConfig: Small phantom settings
    """
    return PhantomConfig(dims=(32, 32, 32), nodule_radius=(1.5, 3.0), nodule_count=(1, 2))


@pytest.fixture
def tiny_config():
    """
    RunConfig shrunk for unit tests: 16³ volumes, narrow networks, T = 50.

    Returns:
        RunConfig: Valid configuration in nodule+lung+texture mode
    """
    return RunConfig(
        data=PhantomConfig(dims=(16, 16, 16), nodule_radius=(1.0, 1.5), nodule_count=(0, 1), jitter=0.0),
        vae=VaeConfig(
            widths=(8, 8, 8),
            groups=4,
            perceptual_widths=(4, 4),
            disc_widths=(4, 4),
            adv_warmup_steps=2,
        ),
        unet=UnetConfig(
            levels=2,
            blocks_per_level=1,
            base_channels=8,
            max_channels=16,
            context_dim=8,
            attention_width=8,
            token_grid=2,
            groups=4,
        ),
        diffusion=DiffusionConfig(num_timesteps=50),
        train=TrainConfig(steps=4, checkpoint_every=2, lr_vae=1e-3, lr_unet=1e-3),
        seed=7,
    )


@pytest.fixture
def phantom_dir(tmp_path: Path, tiny_config: RunConfig) -> Path:
    """
    Directory holding four generated 16³ phantoms and their manifest.

    Returns:
        Path: Dataset directory
    """
    out = tmp_path / "phantoms"
    generate_dataset(out, tiny_config.data, 4, seed=tiny_config.seed, workers=1)
    return out


def brute_force_conv3d(x, weight, bias, stride, padding):
    """Six nested loops over output voxels and the kernel window."""
    out_c, in_c, k = weight.shape[0], weight.shape[1], weight.shape[2]
    xp = np.pad(x, ((0, 0),) + ((padding, padding),) * 3)
    dims = [(d + 2 * padding - k) // stride + 1 for d in x.shape[1:]]
    out = np.zeros((out_c, *dims))
    for o in range(out_c):
        for z in range(dims[0]):
            for y in range(dims[1]):
                for w in range(dims[2]):
                    acc = bias[o] if bias is not None else 0.0
                    for c in range(in_c):
                        for i in range(k):
                            for j in range(k):
                                for l in range(k):
                                    acc += weight[o, c, i, j, l] * xp[c, z * stride + i, y * stride + j, w * stride + l]
                    out[o, z, y, w] = acc
    return out


def brute_force_avg_pool3d(x, k):
    """Mean of every k-cube, one output voxel at a time."""
    c, d, h, w = x.shape
    out = np.zeros((c, d // k, h // k, w // k))
    for ch in range(c):
        for z in range(d // k):
            for y in range(h // k):
                for v in range(w // k):
                    out[ch, z, y, v] = x[ch, z * k:(z + 1) * k, y * k:(y + 1) * k, v * k:(v + 1) * k].mean()
    return out


def brute_force_ssim3d(x, y, size=11, sigma=1.5, data_range=2.0):
    """SSIM with an explicit 3-D Gaussian window, averaged over every full-window position."""
    taps = np.exp(-((np.arange(size) - (size - 1) / 2.0) ** 2) / (2.0 * sigma ** 2))
    taps /= taps.sum()
    window = taps[:, None, None] * taps[None, :, None] * taps[None, None, :]
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    a, b = x[0], y[0]
    values = []
    for i in range(a.shape[0] - size + 1):
        for j in range(a.shape[1] - size + 1):
            for k in range(a.shape[2] - size + 1):
                pa = a[i:i + size, j:j + size, k:k + size]
                pb = b[i:i + size, j:j + size, k:k + size]
                mu_a = (window * pa).sum()
                mu_b = (window * pb).sum()
                var_a = (window * pa * pa).sum() - mu_a ** 2
                var_b = (window * pb * pb).sum() - mu_b ** 2
                cov = (window * pa * pb).sum() - mu_a * mu_b
                values.append(
                    (2 * mu_a * mu_b + c1) * (2 * cov + c2) / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
                )
    return float(np.mean(values))


class PointMassOracle:
    """
    Optimal velocity predictor for a dataset holding the single latent x_star:
    eps_hat = (z_t - sqrt(ab) x*) / sqrt(1 - ab), v = sqrt(ab) eps_hat - sqrt(1 - ab) x*.
    """

    conditional = False

    def __init__(self, x_star, schedule):
        self.x_star = x_star
        self.schedule = schedule

    def embed_context(self, mask_latent):
        return None

    def predict(self, z_t, t, context=None, mask_latent=None):
        a = self.schedule.sqrt_alpha_bars[t]
        s = self.schedule.sqrt_one_minus_alpha_bars[t]
        eps_hat = (z_t - a * self.x_star) / s
        return a * eps_hat - s * self.x_star


class GaussianOracle:
    """Optimal predictor for x0 ~ N(0, I): E[v | z_t] = 0."""

    conditional = False

    def embed_context(self, mask_latent):
        return None

    def predict(self, z_t, t, context=None, mask_latent=None):
        return np.zeros_like(z_t)
