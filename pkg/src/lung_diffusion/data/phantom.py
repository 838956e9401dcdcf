"""
Procedural lung phantoms.

A phantom is a body ellipsoid over background, two lung ellipsoids, and up
to a few spherical nodules placed inside the lungs. Intensities are
anti-aliased with a Gaussian edge; mask labels are hard.

Labels: 0 background, 1 lung, 2..6 nodule with texture label - 1.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import erfc

from ..core import Rng, Volume
from ..errors import ConfigError
from ..models.config import PhantomConfig
from ..models.records import NoduleRecord

logger = logging.getLogger(__name__)

MAX_PLACEMENT_TRIES = 100
BACKGROUND_LABEL = 0
LUNG_LABEL = 1


def nodule_label(texture: int) -> int:
    return LUNG_LABEL + texture


class Phantom(NamedTuple):
    volume: Volume
    mask: np.ndarray
    nodules: list[NoduleRecord]


@dataclass(frozen=True)
class Ellipsoid:
    center: np.ndarray
    semi_axes: np.ndarray

    def rho(self, grid: np.ndarray) -> np.ndarray:
        """Normalized radius: < 1 inside, 1 on the surface."""
        scaled = (grid - self.center[:, None, None, None]) / self.semi_axes[:, None, None, None]
        return np.sqrt((scaled * scaled).sum(axis=0))

    def signed_distance(self, grid: np.ndarray) -> np.ndarray:
        """Radial distance to the surface along the ray from the centre (negative inside)."""
        offset = grid - self.center[:, None, None, None]
        r = np.sqrt((offset * offset).sum(axis=0))
        rho = self.rho(grid)
        d = np.full(r.shape, -float(self.semi_axes.min()))
        np.subtract(r, r / np.where(rho > 0, rho, 1.0), out=d, where=rho > 0)
        return d


@dataclass(frozen=True)
class Anatomy:
    """Jittered body and lung geometry for one phantom."""
    body: Ellipsoid
    lungs: tuple[Ellipsoid, Ellipsoid]


def soft_occupancy(signed_distance: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian-smoothed step: 1 deep inside, 0.5 on the surface, 0 far outside."""
    return 0.5 * erfc(signed_distance / (sigma * np.sqrt(2.0)))


def voxel_grid(dims: Sequence[int]) -> np.ndarray:
    """(3, D, H, W) array of voxel centre coordinates."""
    return np.stack(np.meshgrid(*(np.arange(d, dtype=np.float64) for d in dims), indexing="ij"))


def sample_anatomy(config: PhantomConfig, rng: Rng) -> Anatomy:
    """Draw body and lung ellipsoids with per-seed relative jitter."""
    dims = np.array(config.dims, dtype=np.float64)
    center = (dims - 1.0) / 2.0
    j = config.jitter

    def jitter(size: int) -> np.ndarray:
        return np.asarray(rng.uniform(-j, j, size)) if j > 0 else np.zeros(size)

    body = Ellipsoid(center.copy(), np.array(config.body_semi_axes) * dims * (1.0 + jitter(3)))
    lungs = []
    for side in (-1.0, 1.0):
        semi = np.array(config.lung_semi_axes) * dims * (1.0 + jitter(3))
        lung_center = center + np.array([0.0, 0.0, side * config.lung_offset * dims[2]])
        lung_center = lung_center + jitter(3) * np.array(config.lung_semi_axes) * dims
        lungs.append(Ellipsoid(lung_center, semi))
    return Anatomy(body=body, lungs=(lungs[0], lungs[1]))


def nodule_intensity(config: PhantomConfig, texture: int) -> float:
    """Linear texture rule: texture 5 gives the solid intensity exactly."""
    t = texture / 5.0
    return (1.0 - t) * config.lung_intensity + t * config.solid_intensity


def nodule_profile(grid: np.ndarray, nodule: NoduleRecord, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """(soft weight, hard inside mask): weight 1 within the radius, Gaussian falloff outside."""
    offset = grid - np.array(nodule.center, dtype=np.float64)[:, None, None, None]
    r = np.sqrt((offset * offset).sum(axis=0))
    outside = np.maximum(r - nodule.radius, 0.0)
    return np.exp(-(outside * outside) / (2.0 * sigma * sigma)), r <= nodule.radius


def _ball_offsets(radius: float) -> np.ndarray:
    reach = int(np.ceil(radius))
    axis = np.arange(-reach, reach + 1)
    oz, oy, ox = np.meshgrid(axis, axis, axis, indexing="ij")
    inside = oz * oz + oy * oy + ox * ox <= radius * radius
    return np.stack([oz[inside], oy[inside], ox[inside]], axis=1)


def nodule_fits(nodule: NoduleRecord, lung_mask: np.ndarray) -> bool:
    """True when every voxel within radius + 1 of the centre lies inside lung_mask."""
    points = _ball_offsets(nodule.radius + 1.0) + np.array(nodule.center)
    dims = np.array(lung_mask.shape)
    if np.any(points < 0) or np.any(points >= dims):
        return False
    return bool(np.all(lung_mask[points[:, 0], points[:, 1], points[:, 2]]))


def _separated(nodule: NoduleRecord, placed: Sequence[NoduleRecord]) -> bool:
    c = np.array(nodule.center, dtype=np.float64)
    for other in placed:
        gap = np.linalg.norm(c - np.array(other.center, dtype=np.float64))
        if gap < nodule.radius + other.radius + 1.0:
            return False
    return True


def _nodule_count(config: PhantomConfig, rng: Rng) -> int:
    lo, hi = config.nodule_count
    if config.nodule_rate is not None:
        return int(np.clip(rng.poisson(config.nodule_rate), lo, hi))
    return rng.integers(lo, hi)


def place_nodules(config: PhantomConfig, lung_masks: Sequence[np.ndarray], rng: Rng) -> list[NoduleRecord]:
    """
    Rejection-sample nodules inside the lungs.

    A nodule that cannot be placed within MAX_PLACEMENT_TRIES is skipped
    and logged.
    """
    count = _nodule_count(config, rng)
    placed: list[NoduleRecord] = []
    bounds = [np.argwhere(m) for m in lung_masks]
    for index in range(count):
        for _ in range(MAX_PLACEMENT_TRIES):
            lung = rng.integers(0, len(lung_masks) - 1)
            if bounds[lung].size == 0:
                continue
            lo, hi = bounds[lung].min(axis=0), bounds[lung].max(axis=0)
            center = tuple(rng.integers(int(a), int(b)) for a, b in zip(lo, hi))
            radius = float(rng.uniform(*config.nodule_radius))
            candidate = NoduleRecord(center=center, radius=radius, texture=rng.integers(1, 5))
            if nodule_fits(candidate, lung_masks[lung]) and _separated(candidate, placed):
                placed.append(candidate)
                break
        else:
            logger.warning(
                "Skipped nodule %d of %d: no valid placement after %d tries",
                index + 1, count, MAX_PLACEMENT_TRIES,
            )
    return placed


def generate_phantom(
    config: PhantomConfig,
    rng: Rng,
    nodules: Optional[Sequence[NoduleRecord]] = None,
) -> Phantom:
    """
    Generate one phantom volume, its label mask and nodule records.

    Args:
        config: Phantom parameters
        rng: Stream for geometry and nodule draws
        nodules: Explicit nodules (skips random placement); each must fit
            inside one lung with a 1-voxel margin

    Returns:
        Phantom: (volume (1, D, H, W) in [-1, 1], uint8 labels (D, H, W), nodules)

    Raises:
        ConfigError: If an explicit nodule does not fit inside a lung

    Example:
        phantom = generate_phantom(PhantomConfig(dims=(32, 32, 32), nodule_radius=(1.5, 3.0)), Rng(7))
    """
    grid = voxel_grid(config.dims)
    anatomy = sample_anatomy(config, rng.spawn("geometry"))
    sigma = config.edge_sigma

    body_occ = soft_occupancy(anatomy.body.signed_distance(grid), sigma)
    lung_occ = np.maximum(*(soft_occupancy(l.signed_distance(grid), sigma) for l in anatomy.lungs))
    volume = config.background_intensity + body_occ * (config.body_intensity - config.background_intensity)
    volume = volume + lung_occ * (config.lung_intensity - volume)

    lung_masks = [lung.rho(grid) <= 1.0 for lung in anatomy.lungs]
    mask = np.where(lung_masks[0] | lung_masks[1], LUNG_LABEL, BACKGROUND_LABEL).astype(np.uint8)

    if nodules is None:
        records = place_nodules(config, lung_masks, rng.spawn("nodules"))
    else:
        records = list(nodules)
        for nodule in records:
            if not any(nodule_fits(nodule, m) for m in lung_masks):
                raise ConfigError(f"nodule at {nodule.center} with radius {nodule.radius} does not fit in a lung")

    for nodule in records:
        weight, inside = nodule_profile(grid, nodule, sigma)
        volume = (1.0 - weight) * volume + weight * nodule_intensity(config, nodule.texture)
        mask[inside] = nodule_label(nodule.texture)

    volume = np.clip(volume, -1.0, 1.0)
    return Phantom(volume=volume[None].astype(np.float64), mask=mask, nodules=records)
