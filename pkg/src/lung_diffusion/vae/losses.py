"""
VAE loss terms, each returning the value and its gradient.

The perceptual term compares channel-normalized activations of a frozen,
seeded feature pyramid; the adversarial term is least-squares GAN.
"""

from typing import Any

import numpy as np

from ..core import Volume, check_same_shape
from ..nn.pyramid import FeaturePyramid, normalize_channels, normalize_channels_backward


def mae_loss(x: Volume, x_hat: Volume) -> tuple[float, Volume]:
    """mean |x - x_hat| and its gradient with respect to x_hat."""
    check_same_shape(x, x_hat, "reconstruction")
    diff = x_hat - x
    return float(np.abs(diff).mean()), np.sign(diff) / diff.size


def kl_loss(mu: Volume, logvar: Volume) -> float:
    """mean 0.5 * (mu^2 + exp(logvar) - 1 - logvar); zero iff mu = logvar = 0."""
    check_same_shape(mu, logvar, "posterior")
    return float((0.5 * (mu * mu + np.exp(logvar) - 1.0 - logvar)).mean())


def kl_grads(mu: Volume, logvar: Volume) -> tuple[Volume, Volume]:
    n = mu.size
    return mu / n, 0.5 * (np.exp(logvar) - 1.0) / n


def _perceptual_terms(x: Volume, x_hat: Volume, extractor: FeaturePyramid) -> tuple[float, Any]:
    check_same_shape(x, x_hat, "perceptual inputs")
    feats_x, _ = extractor.forward(x)
    feats_y, caches_y = extractor.forward(x_hat)
    levels = len(feats_x)
    total = 0.0
    per_level = []
    for fx, fy in zip(feats_x, feats_y):
        nx, _ = normalize_channels(fx)
        ny, c_norm = normalize_channels(fy)
        diff = ny - nx
        voxels = fx.shape[1] * fx.shape[2] * fx.shape[3]
        total += float((diff * diff).sum()) / voxels
        per_level.append((diff, voxels, c_norm))
    return total / levels, (caches_y, per_level, levels)


def perceptual_loss(x: Volume, x_hat: Volume, extractor: FeaturePyramid) -> float:
    """
    Mean squared distance between channel-normalized features, averaged
    over pyramid levels. Symmetric, and zero when the features agree.
    """
    return _perceptual_terms(x, x_hat, extractor)[0]


def perceptual_loss_and_grad(x: Volume, x_hat: Volume, extractor: FeaturePyramid) -> tuple[float, Volume]:
    """Perceptual loss and its gradient with respect to x_hat."""
    value, (caches_y, per_level, levels) = _perceptual_terms(x, x_hat, extractor)
    grads = [
        normalize_channels_backward(c_norm, 2.0 * diff / (voxels * levels))
        for diff, voxels, c_norm in per_level
    ]
    return value, extractor.backward(caches_y, grads)


def lsgan_losses(real_logits: np.ndarray, fake_logits: np.ndarray) -> tuple[float, float]:
    """
    Least-squares GAN losses.

        d_loss = 0.5 * mean[(D(real) - 1)^2 + D(fake)^2]
        g_loss = 0.5 * mean[(D(fake) - 1)^2]
    """
    d_loss = 0.5 * float(((real_logits - 1.0) ** 2).mean() + (fake_logits ** 2).mean())
    g_loss = 0.5 * float(((fake_logits - 1.0) ** 2).mean())
    return d_loss, g_loss


def adversarial_losses(real: Volume, fake: Volume, discriminator: Any) -> tuple[float, float]:
    """(d_loss, g_loss) of a discriminator on a real/fake pair."""
    check_same_shape(real, fake, "adversarial inputs")
    real_logits, _ = discriminator.forward(real)
    fake_logits, _ = discriminator.forward(fake)
    return lsgan_losses(real_logits, fake_logits)
