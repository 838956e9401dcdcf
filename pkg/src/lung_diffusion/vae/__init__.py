"""3D VAE: model, losses, patch discriminator, trainer and latent statistics."""

from .discriminator import PatchDiscriminator
from .losses import adversarial_losses, kl_loss, lsgan_losses, mae_loss, perceptual_loss
from .model import VAE, Posterior, reparameterize
from .stats import destandardize, latent_stats, standardize
from .trainer import VaeTrainer, load_vae

__all__ = [
    "PatchDiscriminator",
    "adversarial_losses",
    "kl_loss",
    "lsgan_losses",
    "mae_loss",
    "perceptual_loss",
    "VAE",
    "Posterior",
    "reparameterize",
    "destandardize",
    "latent_stats",
    "standardize",
    "VaeTrainer",
    "load_vae",
]
