"""
End-to-end generation: sample latents with the U-Net, de-standardize,
decode with the VAE, and write volumes plus a manifest.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..conditioning.masks import prepare_mask_latent, texture_sweep
from ..core import Volume
from ..data.io import write_mask, write_volume
from ..data.manifest import MANIFEST_NAME, MASK_SUFFIX, SIDECAR_SUFFIX, VOLUME_SUFFIX
from ..errors import ConfigError, ShapeError
from ..models import ConditioningMode, DatasetManifest, LatentStats, ManifestRecord, PhantomSidecar, RunConfig
from ..models.config import config_hash
from ..unet.model import DenoiserUnet
from ..utils import atomic_write, build_id, parallel_map
from ..vae.model import VAE
from ..vae.stats import destandardize
from .sampler import sample, sample_stream
from .schedule import schedule_from_config

logger = logging.getLogger(__name__)

TEXTURE_SCORES = (1, 2, 3, 4, 5)


def check_mask_for_mode(mode: ConditioningMode, labels: Optional[np.ndarray], sweep: bool = False) -> None:
    """
    Reject mask/mode combinations that cannot be sampled.

    Raises:
        ConfigError: On a mask in unconditional mode, a missing mask in a
            conditional mode, or a texture sweep without texture conditioning
    """
    if not mode.conditional and labels is not None:
        raise ConfigError(f"mode conflict: conditioning mode '{mode.value}' does not accept a mask")
    if mode.conditional and labels is None:
        raise ConfigError(f"conditioning mode '{mode.value}' requires a mask")
    if sweep and mode != ConditioningMode.NODULE_LUNG_TEXTURE:
        raise ConfigError(f"texture sweep needs mode '{ConditioningMode.NODULE_LUNG_TEXTURE.value}', got '{mode.value}'")


@dataclass
class SampleJob:
    """One output volume: its file stem, sample index (noise stream) and mask."""
    stem: str
    index: int
    labels: Optional[np.ndarray] = None


def plan_jobs(n: int, labels: Optional[np.ndarray], sweep: bool) -> list[SampleJob]:
    """
    Sample jobs in output order.

    A texture sweep renders each index once per texture score with the same
    noise stream, so only the nodule texture differs between the renders.
    """
    if n < 1:
        raise ValueError(f"sample count must be positive, got {n}")
    if not sweep:
        return [SampleJob(f"sample_{i:04d}", i, labels) for i in range(n)]
    return [
        SampleJob(f"sample_{i:04d}_tex{score}", i, texture_sweep(labels, score))
        for i in range(n)
        for score in TEXTURE_SCORES
    ]


class Generator:
    """
    Sampler plus decoder for one trained run.

    Example:
        generator = Generator(unet, vae, config, meta.latent_stats)
        volume = generator.generate(index=0, labels=mask)
    """

    def __init__(self, unet: DenoiserUnet, vae: VAE, config: RunConfig, stats: Optional[LatentStats] = None):
        if config.diffusion.standardize_latents and stats is None:
            raise ConfigError("checkpoint carries no latent statistics but standardize_latents is on")
        self.unet = unet
        self.vae = vae
        self.config = config
        self.stats = stats if config.diffusion.standardize_latents else None
        self.schedule = schedule_from_config(config.diffusion)

    def latent_shape(self, labels: Optional[np.ndarray]) -> tuple[int, ...]:
        spatial = tuple(labels.shape) if labels is not None else tuple(self.config.data.dims)
        return self.vae.latent_shape(spatial)

    def generate(self, index: int, labels: Optional[np.ndarray] = None) -> Volume:
        """Volume for the index-th noise stream of the run's seed."""
        mode = self.config.mode
        check_mask_for_mode(mode, labels)
        mask_latent = prepare_mask_latent(labels, mode) if labels is not None else None
        shape = self.latent_shape(labels)
        if mask_latent is not None and mask_latent.shape[1:] != shape[1:]:
            raise ShapeError(f"mask latent {mask_latent.shape[1:]} does not match latent {shape[1:]}")
        clamp = self.config.diffusion.clamp_x0_std
        z = sample(self.unet, self.schedule, shape, sample_stream(self.config.seed, index),
                   mask_latent=mask_latent, clamp_x0=clamp)
        if self.stats is not None:
            z = destandardize(z, self.stats)
        return self.vae.decode(z)


def generate_samples(
    generator: Generator,
    out_dir: Path,
    n: int,
    labels: Optional[np.ndarray] = None,
    sweep: bool = False,
    workers: int = 1,
    on_done: Optional[Callable[[ManifestRecord], None]] = None,
) -> DatasetManifest:
    """
    Write n samples (5n for a texture sweep) with sidecars and a manifest.

    Each sample's noise comes from its own (seed, index) stream, so output is
    identical for any worker count.

    Raises:
        ConfigError: If the mask does not fit the conditioning mode
    """
    config = generator.config
    check_mask_for_mode(config.mode, labels, sweep)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp_hash = config_hash(config)
    build = build_id()

    def task(job: SampleJob) -> ManifestRecord:
        volume = generator.generate(job.index, job.labels)
        write_volume(out_dir / f"{job.stem}{VOLUME_SUFFIX}", volume)
        mask_path = None
        if job.labels is not None:
            mask_path = f"{job.stem}{MASK_SUFFIX}"
            write_mask(out_dir / mask_path, job.labels)
        seed = config.seed + job.index
        sidecar = PhantomSidecar(seed=seed, config_hash=stamp_hash, build_id=build)
        with atomic_write(out_dir / f"{job.stem}{SIDECAR_SUFFIX}", "w") as f:
            f.write(sidecar.model_dump_json(indent=2))
        record = ManifestRecord(
            volume_path=f"{job.stem}{VOLUME_SUFFIX}",
            mask_path=mask_path,
            seed=seed,
            config_hash=stamp_hash,
            build_id=build,
        )
        if on_done is not None:
            on_done(record)
        return record

    records = parallel_map(task, plan_jobs(n, labels, sweep), workers)
    manifest = DatasetManifest(records, root=out_dir)
    manifest.save(out_dir / MANIFEST_NAME)
    logger.info("Wrote %d samples to %s", len(records), out_dir)
    return manifest
