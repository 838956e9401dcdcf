"""
Per-channel latent statistics used to standardize diffusion inputs.
"""

from typing import Sequence

import numpy as np

from ..core import Volume
from ..errors import ShapeError
from ..models.reports import LatentStats

STD_FLOOR = 1e-6


def latent_stats(latents: Sequence[Volume]) -> LatentStats:
    """
    Mean and standard deviation per channel, pooled over all latents and voxels.

    Raises:
        ValueError: If fewer than two latents are given
        ShapeError: If channel counts differ
    """
    if len(latents) == 0:
        raise ValueError("cannot compute latent statistics of an empty set")
    if len(latents) < 2:
        raise ValueError(f"latent statistics need at least 2 latents, got {len(latents)}")
    channels = {z.shape[0] for z in latents}
    if len(channels) != 1:
        raise ShapeError(f"latents have differing channel counts {sorted(channels)}")
    flat = np.concatenate([z.reshape(z.shape[0], -1) for z in latents], axis=1)
    mean = flat.mean(axis=1)
    std = np.maximum(flat.std(axis=1), STD_FLOOR)
    return LatentStats(mean=mean.tolist(), std=std.tolist())


def _broadcast(stats: LatentStats, z: Volume) -> tuple[np.ndarray, np.ndarray]:
    if len(stats.mean) != z.shape[0]:
        raise ShapeError(f"stats cover {len(stats.mean)} channels, latent has {z.shape[0]}")
    mean = np.asarray(stats.mean)[:, None, None, None]
    std = np.asarray(stats.std)[:, None, None, None]
    return mean, std


def standardize(z: Volume, stats: LatentStats) -> Volume:
    mean, std = _broadcast(stats, z)
    return (z - mean) / std


def destandardize(z: Volume, stats: LatentStats) -> Volume:
    mean, std = _broadcast(stats, z)
    return z * std + mean
