"""
Diffusion training on standardized VAE latents.

Each step draws t uniformly from 1..T and fresh noise from the (seed, attempt)
stream, forms z_t, and takes one AdamW step on the Min-SNR-weighted
velocity loss. A non-finite loss or gradient skips the step.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..conditioning.masks import downsample_mask, encode_mask
from ..core import Rng, Volume
from ..data.io import read_mask, read_volume
from ..errors import ConfigError, FormatError, NumericalError
from ..models.config import ConditioningMode, RunConfig, unet_config_hash
from ..models.records import DatasetManifest
from ..models.reports import CheckpointMeta, DiffusionLogEntry, LatentStats
from ..nn.checkpoint import load_checkpoint, read_checkpoint_meta, save_checkpoint
from ..nn.optim import AdamWConfig, apply_adamw
from ..unet.model import DenoiseInput, DenoiserUnet
from ..utils import append_jsonl, build_id, parallel_map, truncate_jsonl
from ..vae.model import VAE
from ..vae.stats import latent_stats, standardize
from .objectives import diffusion_loss_and_grad, q_sample, v_target
from .schedule import NoiseSchedule, schedule_from_config

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "unet.ckpt"
LOG_NAME = "train_log.jsonl"
MAX_CONSECUTIVE_SKIPS = 20


@dataclass
class DiffusionStepResult:
    loss: float
    t: int
    skipped: bool = False


@dataclass
class TrainingData:
    """Standardized latents with their mask latents (None when unconditional)."""
    latents: list[Volume]
    mask_latents: Optional[list[Volume]]
    stats: Optional[LatentStats]
    codebook: list[float]


def prepare_training_data(
    manifest: DatasetManifest,
    vae: VAE,
    config: RunConfig,
    workers: int = 1,
) -> TrainingData:
    """
    Encode every manifest volume to its posterior mean, standardize, and
    encode masks for the run's conditioning mode.

    Raises:
        ValueError: If the manifest is empty
        FormatError: If a conditional run meets a record without a mask
    """
    if len(manifest) == 0:
        raise ValueError("cannot train on an empty manifest")
    mode = config.mode

    def encode(index: int) -> tuple[Volume, Optional[np.ndarray]]:
        record = manifest[index]
        mu = vae.encode(read_volume(manifest.resolve(record.volume_path))).mu
        encoded = None
        if mode.conditional:
            if record.mask_path is None:
                raise FormatError(f"record {record.volume_path} has no mask but mode is '{mode.value}'")
            encoded = encode_mask(read_mask(manifest.resolve(record.mask_path)), mode)
        return mu, encoded

    results = parallel_map(encode, range(len(manifest)), workers)
    latents = [mu for mu, _ in results]
    stats = None
    if config.diffusion.standardize_latents:
        stats = latent_stats(latents)
        latents = [standardize(z, stats) for z in latents]
    mask_latents = None
    codebook: set[float] = set()
    if mode.conditional:
        mask_latents = []
        for _, encoded in results:
            codebook.update(np.unique(encoded).tolist())
            mask_latents.append(downsample_mask(encoded))
    return TrainingData(latents, mask_latents, stats, sorted(codebook))


class DiffusionTrainer:
    """
    Owns the U-Net, its optimizer settings and the noise schedule.

    Example:
        trainer = DiffusionTrainer(config)
        result = trainer.train_step(latent, mask_latent, Rng(0).for_step(0))
    """

    def __init__(self, config: RunConfig, stats: Optional[LatentStats] = None):
        self.config = config
        self.schedule: NoiseSchedule = schedule_from_config(config.diffusion)
        root = Rng(config.seed)
        self.unet = DenoiserUnet(config.unet, config.diffusion.num_timesteps, root.spawn("init").spawn("unet"))
        self.train_rng = root.spawn("train").spawn("unet")
        self.optim = AdamWConfig(lr=config.train.lr_unet, weight_decay=config.train.weight_decay)
        self.latent_stats = stats
        self.config_hash = unet_config_hash(config)
        # draws consumed so far; runs ahead of step when steps are skipped
        self.attempts = 0

    @property
    def step(self) -> int:
        return self.unet.params.step

    def train_step(self, x0: Volume, mask_latent: Optional[Volume], rng: Rng) -> DiffusionStepResult:
        """
        One training step on a standardized latent.

        A non-finite input, loss or gradient skips the step and leaves the
        parameters and step counter untouched.

        Returns:
            DiffusionStepResult: Loss, drawn timestep, and whether the step was skipped
        """
        schedule = self.schedule
        t = rng.spawn("t").integers(1, schedule.num_timesteps)
        eps = rng.spawn("eps").normal(x0.shape)
        z_t = q_sample(x0, t, eps, schedule)
        v = v_target(x0, eps, t, schedule)

        params = self.unet.params
        params.zero_grad()
        try:
            v_hat, cache = self.unet.forward(DenoiseInput(z_t, t, mask_latent=mask_latent))
        except NumericalError as e:
            logger.warning("Skipped step %d: %s", self.step, e)
            return DiffusionStepResult(loss=float("nan"), t=t, skipped=True)
        loss, grad = diffusion_loss_and_grad(v_hat, v, t, schedule, self.config.diffusion.min_snr_gamma)
        if not np.isfinite(loss):
            logger.warning("Skipped step %d: non-finite loss at t=%d", self.step, t)
            return DiffusionStepResult(loss=loss, t=t, skipped=True)
        self.unet.backward(cache, grad)
        try:
            apply_adamw(params, self.optim)
        except NumericalError as e:
            params.zero_grad()
            logger.warning("Skipped step %d: %s", self.step, e)
            return DiffusionStepResult(loss=loss, t=t, skipped=True)
        return DiffusionStepResult(loss=loss, t=t)

    def fit(
        self,
        data: TrainingData,
        steps: int,
        out_dir: Path,
        checkpoint_every: Optional[int] = None,
        on_step: Optional[Callable[[DiffusionLogEntry], None]] = None,
    ) -> list[DiffusionLogEntry]:
        """
        Train until the step counter reaches steps, checkpointing atomically.

        Attempt k draws its latent, timestep and noise from the (seed, k)
        stream. Skipped attempts consume a stream without advancing the step
        counter, and the attempt count is checkpointed so a resumed run draws
        the same streams as an uninterrupted one.

        Raises:
            NumericalError: After MAX_CONSECUTIVE_SKIPS skipped attempts in a row
        """
        if not data.latents:
            raise ValueError("no training latents")
        out_dir = Path(out_dir)
        checkpoint_every = checkpoint_every or self.config.train.checkpoint_every
        log_path = out_dir / LOG_NAME
        entries = []
        skipped_run = 0
        while self.step < steps:
            rng = self.train_rng.for_step(self.attempts)
            index = rng.spawn("data").integers(0, len(data.latents) - 1)
            mask = data.mask_latents[index] if data.mask_latents is not None else None
            result = self.train_step(data.latents[index], mask, rng)
            self.attempts += 1
            skipped_run = skipped_run + 1 if result.skipped else 0
            entry = DiffusionLogEntry(step=self.step, loss=result.loss, t=result.t, skipped=result.skipped)
            if not result.skipped:
                append_jsonl(log_path, entry.model_dump_json())
            entries.append(entry)
            if on_step is not None:
                on_step(entry)
            if skipped_run >= MAX_CONSECUTIVE_SKIPS:
                raise NumericalError(
                    f"{skipped_run} consecutive non-finite steps at step {self.step}; aborting", term="loss"
                )
            if not result.skipped and (self.step % checkpoint_every == 0 or self.step == steps):
                self.save(out_dir / CHECKPOINT_NAME)
        return entries

    def checkpoint_meta(self) -> CheckpointMeta:
        return CheckpointMeta(
            kind="unet",
            config_hash=self.config_hash,
            seed=self.config.seed,
            build_id=build_id(),
            step=self.step,
            attempts=self.attempts,
            mode=self.config.mode.value,
            latent_stats=self.latent_stats,
            section={
                "unet": self.config.unet.model_dump(mode="json"),
                "diffusion": self.config.diffusion.model_dump(mode="json"),
            },
        )

    def save(self, path: Path) -> None:
        save_checkpoint(path, {"unet": self.unet.params}, self.checkpoint_meta())
        logger.info("Saved U-Net checkpoint at step %d to %s", self.step, path)

    def resume(self, out_dir: Path) -> bool:
        path = Path(out_dir) / CHECKPOINT_NAME
        if not path.exists():
            return False
        meta = load_checkpoint(path, {"unet": self.unet.params}, self.config_hash)
        self.attempts = self.step
        if meta is not None:
            if meta.attempts is not None:
                self.attempts = meta.attempts
            if meta.latent_stats is not None:
                self.latent_stats = meta.latent_stats
        truncate_jsonl(Path(out_dir) / LOG_NAME, self.step)
        logger.info("Resumed diffusion training from step %d", self.step)
        return True


def load_unet(path: Path, config: RunConfig) -> tuple[DenoiserUnet, Optional[CheckpointMeta]]:
    """
    Load U-Net weights and sidecar metadata for sampling.

    Raises:
        ConfigError: If the checkpoint belongs to another U-Net/diffusion config or mode
    """
    unet = DenoiserUnet(
        config.unet, config.diffusion.num_timesteps, Rng(config.seed).spawn("init").spawn("unet")
    )
    meta = load_checkpoint(path, {"unet": unet.params}, unet_config_hash(config))
    if meta is not None and meta.mode is not None and meta.mode != config.mode.value:
        raise ConfigError(
            f"mode conflict: checkpoint was trained in mode '{meta.mode}', config says '{config.mode.value}'"
        )
    return unet, meta


def config_for_checkpoint(
    path: Path,
    config: RunConfig,
    requested: Optional[ConditioningMode] = None,
) -> RunConfig:
    """
    Config in the conditioning mode a U-Net checkpoint was trained in.

    The sidecar's mode wins; a requested mode only cross-checks it. Without
    a sidecar the requested mode (or the config's own) is used as is.

    Raises:
        ConfigError: If the requested mode differs from the trained one
        FormatError: If the sidecar names an unknown mode
    """
    meta = read_checkpoint_meta(path)
    if meta is None or meta.mode is None:
        return config.with_mode(requested) if requested is not None else config
    try:
        trained = ConditioningMode(meta.mode)
    except ValueError:
        raise FormatError(f"checkpoint {path} names unknown mode '{meta.mode}'")
    if requested is not None and requested != trained:
        raise ConfigError(
            f"mode conflict: checkpoint was trained in mode '{trained.value}', --mode says '{requested.value}'"
        )
    return config.with_mode(trained)
