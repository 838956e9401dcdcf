"""Gaussian statistics of feature matrices and the Fréchet distance between them."""

import logging
from typing import NamedTuple

import numpy as np

from ..core import psd_sqrt
from ..errors import NumericalError, ShapeError

logger = logging.getLogger(__name__)

NEGATIVE_CLAMP = -1e-8


class GaussianStats(NamedTuple):
    """Sample mean (d,) and symmetric covariance (d, d)."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def gaussian_stats(features: np.ndarray) -> GaussianStats:
    """
    Mean and unbiased covariance of an (n, d) feature matrix.

    Raises:
        ShapeError: If features is not 2-D
        ValueError: If fewer than two rows are given
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ShapeError(f"features must be (n, d), got shape {f.shape}")
    if f.shape[0] < 2:
        raise ValueError(f"need at least 2 feature rows for a covariance, got {f.shape[0]}")
    mean = f.mean(axis=0)
    centered = f - mean
    cov = centered.T @ centered / (f.shape[0] - 1)
    return GaussianStats(mean=mean, cov=(cov + cov.T) / 2.0)


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """
    Fréchet distance between two Gaussians.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 sqrt(S_a^1/2 S_b S_a^1/2))

    Values in (-1e-8, 0) are round-off and clamp to 0.

    Raises:
        ShapeError: If the dimensions differ
        NumericalError: If the distance is clearly negative
    """
    if a.dim != b.dim:
        raise ShapeError(f"feature dims differ: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    root_a = psd_sqrt(a.cov)
    middle = root_a @ b.cov @ root_a
    covmean = psd_sqrt((middle + middle.T) / 2.0)
    distance = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(covmean))
    if distance < 0.0:
        if distance > NEGATIVE_CLAMP:
            logger.debug(f"clamping round-off Fréchet distance {distance:.3e} to 0")
            return 0.0
        raise NumericalError(f"Fréchet distance is negative: {distance:.6e}", term="frechet_distance")
    return distance
