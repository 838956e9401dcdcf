"""
Anatomical mask encoding.

Labels become raw codes (background 0, lung 0.5, nodule texture 1..5 or a
fixed 3 when texture is not conditioned on), divided by 5 into [0, 1], then
max-pooled by 4 onto the latent grid.
"""

import numpy as np

from ..core import Volume, check_volume, concat_channels, max_pool3d
from ..data.io import MAX_LABEL, check_labels
from ..errors import ConfigError, ShapeError
from ..models.config import ConditioningMode

MASK_POOL = 4
CODE_SCALE = 5.0
LUNG_CODE = 0.5
DEFAULT_NODULE_CODE = 3.0
FIRST_NODULE_LABEL = 2

_RAW_CODES = {
    ConditioningMode.NODULE: (0.0, 0.0) + (DEFAULT_NODULE_CODE,) * 5,
    ConditioningMode.NODULE_LUNG: (0.0, LUNG_CODE) + (DEFAULT_NODULE_CODE,) * 5,
    ConditioningMode.NODULE_LUNG_TEXTURE: (0.0, LUNG_CODE, 1.0, 2.0, 3.0, 4.0, 5.0),
}


def code_table(mode: ConditioningMode) -> np.ndarray:
    """Normalized code per label 0..6 for a conditional mode."""
    if mode not in _RAW_CODES:
        raise ConfigError(f"conditioning mode '{mode.value}' takes no mask")
    return np.array(_RAW_CODES[mode]) / CODE_SCALE


def codebook(mode: ConditioningMode) -> list[float]:
    """Distinct encoded values a mode can produce, ascending."""
    return sorted(set(code_table(mode).tolist()))


def encode_mask(labels: np.ndarray, mode: ConditioningMode) -> Volume:
    """
    Map a (D, H, W) label grid to a (1, D, H, W) Volume of codes in [0, 1].

    Raises:
        ConfigError: If mode is unconditional
        ValueError: If a label is outside 0..6 (message names the voxel)

    Example:
        encoded = encode_mask(labels, ConditioningMode.NODULE_LUNG)
    """
    table = code_table(mode)
    check_labels(labels)
    return table[labels.astype(np.intp)][None]


def downsample_mask(encoded: Volume) -> Volume:
    """Max-pool by 4 so nodules survive onto the latent grid."""
    return max_pool3d(encoded, MASK_POOL)


def concat_condition(z_t: Volume, downsampled: Volume) -> Volume:
    """Append the mask as the last channel of the noisy latent."""
    check_volume(z_t, "noisy latent")
    check_volume(downsampled, "mask latent")
    if z_t.shape[1:] != downsampled.shape[1:]:
        raise ShapeError(
            f"mask latent spatial dims {downsampled.shape[1:]} differ from latent dims {z_t.shape[1:]}"
        )
    if downsampled.shape[0] != 1:
        raise ShapeError(f"mask latent must have one channel, got {downsampled.shape[0]}")
    return concat_channels([z_t, downsampled])


def texture_sweep(labels: np.ndarray, score: int) -> np.ndarray:
    """Copy of labels with every nodule rewritten to one texture score."""
    if not 1 <= score <= 5:
        raise ValueError(f"texture score must be in 1..5, got {score}")
    check_labels(labels)
    out = labels.copy()
    out[(labels >= FIRST_NODULE_LABEL) & (labels <= MAX_LABEL)] = FIRST_NODULE_LABEL + score - 1
    return out


def prepare_mask_latent(labels: np.ndarray, mode: ConditioningMode) -> Volume:
    """encode_mask followed by downsample_mask."""
    return downsample_mask(encode_mask(labels, mode))
