"""
VAE training: one generator AdamW step on the weighted loss, then one
discriminator step once the adversarial warmup is over.
"""

import logging
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..core import Rng, Volume
from ..errors import NumericalError
from ..models.config import RunConfig, vae_config_hash
from ..models.reports import CheckpointMeta, VaeLogEntry, VaeLossBreakdown
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from ..nn.optim import AdamWConfig, apply_adamw, check_grads
from ..nn.pyramid import FeaturePyramid
from ..utils import append_jsonl, build_id, truncate_jsonl
from .discriminator import PatchDiscriminator
from .losses import kl_grads, kl_loss, lsgan_losses, mae_loss, perceptual_loss_and_grad
from .model import VAE, reparameterize

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "vae.ckpt"
LOG_NAME = "train_log.jsonl"


class VaeTrainer:
    """
    Owns the VAE, its discriminator and the frozen perceptual network.

    Attributes:
        config: Run configuration (vae and train sections are used)
        vae: Generator being trained
        discriminator: Patch discriminator
        perceptual: Frozen feature pyramid for the perceptual term

    Example:
        trainer = VaeTrainer(config)
        breakdown = trainer.train_step(volume, Rng(0).for_step(0))
    """

    def __init__(self, config: RunConfig):
        self.config = config
        root = Rng(config.seed)
        init = root.spawn("init")
        self.vae = VAE(config.vae, init.spawn("vae"))
        self.discriminator = PatchDiscriminator(config.vae.disc_widths, init.spawn("disc"))
        self.perceptual = FeaturePyramid(config.vae.perceptual_widths, seed=config.vae.perceptual_seed)
        self.train_rng = root.spawn("train").spawn("vae")
        self.optim = AdamWConfig(lr=config.train.lr_vae, weight_decay=config.train.weight_decay)
        self.config_hash = vae_config_hash(config)

    @property
    def step(self) -> int:
        return self.vae.params.step

    def in_warmup(self) -> bool:
        return self.step < self.config.vae.adv_warmup_steps

    def generator_objective(
        self,
        x: Volume,
        eps: Volume,
        use_adv: bool,
        backward: bool = True,
    ) -> tuple[dict[str, float], float, Volume]:
        """
        Forward the generator with fixed noise and (optionally) backpropagate.

        Returns:
            tuple: (unweighted terms, weighted total, reconstruction)

        Raises:
            NumericalError: If a term is non-finite; gradients are cleared
        """
        cfg = self.config.vae
        vae = self.vae
        posterior, enc_cache = vae.encode_forward(x)
        mu, logvar = posterior
        std = np.exp(0.5 * logvar)
        z = mu + std * eps
        x_hat, dec_cache = vae.decode_forward(z)

        mae, g_mae = mae_loss(x, x_hat)
        g_x_hat = cfg.w_mae * g_mae
        lpips = 0.0
        if cfg.w_lpips > 0:
            lpips, g_lpips = perceptual_loss_and_grad(x, x_hat, self.perceptual)
            g_x_hat = g_x_hat + cfg.w_lpips * g_lpips
        kl = kl_loss(mu, logvar)
        adv_g = 0.0
        if use_adv:
            fake_logits, d_cache = self.discriminator.forward(x_hat)
            adv_g = 0.5 * float(((fake_logits - 1.0) ** 2).mean())
            if backward:
                g_logits = (fake_logits - 1.0) / fake_logits.size
                g_x_hat = g_x_hat + cfg.w_adv * self.discriminator.backward(d_cache, g_logits)
                self.discriminator.params.zero_grad()

        terms = {"mae": mae, "lpips": lpips, "adv_g": adv_g, "kl": kl}
        for name, value in terms.items():
            if not np.isfinite(value):
                vae.params.zero_grad()
                raise NumericalError(f"non-finite {name} loss at step {self.step}", term=name)
        total = cfg.w_mae * mae + cfg.w_lpips * lpips + cfg.w_adv * adv_g + cfg.w_kl * kl

        if backward:
            g_z = vae.decoder.backward(dec_cache, g_x_hat)
            g_kl_mu, g_kl_logvar = kl_grads(mu, logvar)
            g_mu = g_z + cfg.w_kl * g_kl_mu
            g_logvar = g_z * eps * 0.5 * std + cfg.w_kl * g_kl_logvar
            vae.encoder.backward(enc_cache, g_mu, g_logvar)
        return terms, total, x_hat

    def discriminator_gradients(self, real: Volume, fake: Volume) -> float:
        """Discriminator loss and gradients on a real volume and a detached reconstruction."""
        disc = self.discriminator
        disc.params.zero_grad()
        real_logits, c_real = disc.forward(real)
        fake_logits, c_fake = disc.forward(fake)
        d_loss, _ = lsgan_losses(real_logits, fake_logits)
        if not np.isfinite(d_loss):
            raise NumericalError(f"non-finite adv_d loss at step {self.step}", term="adv_d")
        disc.backward(c_real, (real_logits - 1.0) / real_logits.size)
        disc.backward(c_fake, fake_logits / fake_logits.size)
        return d_loss

    def train_step(self, x: Volume, rng: Rng) -> VaeLossBreakdown:
        """
        One generator step, then one discriminator step unless in warmup.

        Both gradient sets are computed and checked before either update is
        applied, so a failure in one network leaves both untouched.

        During warmup the adversarial terms are exactly zero and the
        discriminator is left untouched.

        Raises:
            NumericalError: On a non-finite loss or gradient; VAE and discriminator untouched
        """
        use_adv = self.config.vae.w_adv > 0 and not self.in_warmup()
        self.vae.params.zero_grad()
        eps = rng.spawn("eps").normal(self.vae.latent_shape(x.shape[1:]))
        terms, _, x_hat = self.generator_objective(x, eps, use_adv)
        adv_d = 0.0
        try:
            if use_adv:
                adv_d = self.discriminator_gradients(x, x_hat)
                check_grads(self.discriminator.params)
            check_grads(self.vae.params)
        except NumericalError:
            self.vae.params.zero_grad()
            self.discriminator.params.zero_grad()
            raise
        apply_adamw(self.vae.params, self.optim)
        if use_adv:
            apply_adamw(self.discriminator.params, self.optim)
        return VaeLossBreakdown(adv_d=adv_d, **terms)

    def fit(
        self,
        volumes: Sequence[Volume],
        steps: int,
        out_dir: Path,
        checkpoint_every: Optional[int] = None,
        on_step: Optional[Callable[[VaeLogEntry], None]] = None,
    ) -> list[VaeLogEntry]:
        """
        Train until the step counter reaches steps, checkpointing atomically.

        Each step draws its volume and noise from the (seed, step) stream, so
        a resumed run retraces the uninterrupted one.
        """
        if len(volumes) == 0:
            raise ValueError("no training volumes")
        out_dir = Path(out_dir)
        checkpoint_every = checkpoint_every or self.config.train.checkpoint_every
        log_path = out_dir / LOG_NAME
        entries = []
        while self.step < steps:
            rng = self.train_rng.for_step(self.step)
            index = rng.spawn("data").integers(0, len(volumes) - 1)
            was_warmup = self.in_warmup()
            breakdown = self.train_step(volumes[index], rng)
            entry = VaeLogEntry(step=self.step, **breakdown.model_dump())
            append_jsonl(log_path, entry.model_dump_json())
            entries.append(entry)
            if was_warmup and not self.in_warmup() and self.config.vae.w_adv > 0:
                logger.info("Adversarial warmup finished at step %d", self.step)
            if on_step is not None:
                on_step(entry)
            if self.step % checkpoint_every == 0 or self.step == steps:
                self.save(out_dir / CHECKPOINT_NAME)
        return entries

    def checkpoint_meta(self) -> CheckpointMeta:
        return CheckpointMeta(
            kind="vae",
            config_hash=self.config_hash,
            seed=self.config.seed,
            build_id=build_id(),
            step=self.step,
            section=self.config.vae.model_dump(mode="json"),
        )

    def save(self, path: Path) -> None:
        save_checkpoint(path, {"vae": self.vae.params, "disc": self.discriminator.params}, self.checkpoint_meta())
        logger.info("Saved VAE checkpoint at step %d to %s", self.step, path)

    def resume(self, out_dir: Path) -> bool:
        """
        Restore from out_dir's checkpoint if one exists and trim the log to it.

        Returns:
            bool: Whether a checkpoint was loaded
        """
        path = Path(out_dir) / CHECKPOINT_NAME
        if not path.exists():
            return False
        load_checkpoint(path, {"vae": self.vae.params, "disc": self.discriminator.params}, self.config_hash)
        truncate_jsonl(Path(out_dir) / LOG_NAME, self.step)
        logger.info("Resumed VAE training from step %d", self.step)
        return True


def load_vae(path: Path, config: RunConfig) -> VAE:
    """
    Load VAE weights for inference.

    Raises:
        ConfigError: If the checkpoint was written for another VAE config
    """
    vae = VAE(config.vae, Rng(config.seed).spawn("init").spawn("vae"))
    discriminator = PatchDiscriminator(config.vae.disc_widths, Rng(config.seed).spawn("init").spawn("disc"))
    load_checkpoint(path, {"vae": vae.params, "disc": discriminator.params}, vae_config_hash(config))
    return vae
