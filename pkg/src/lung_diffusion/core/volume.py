"""
Volume type and validation helpers.

A Volume is a float64 numpy array of shape (channels, depth, height, width)
in C (row-major) order, so the flat index of voxel (c, z, y, x) is
((c*D + z)*H + y)*W + x.
"""

from typing import Sequence

import numpy as np
import numpy.typing as npt

from ..errors import NumericalError, ShapeError

Volume = npt.NDArray[np.float64]


def as_volume(data: npt.ArrayLike, name: str = "volume") -> Volume:
    """
    Coerce array-like data into a validated, contiguous float64 Volume.

    Args:
        data: Array-like data of rank 4
        name: Name used in error messages

    Returns:
        Volume: C-contiguous float64 copy (or view if already conforming)

    Raises:
        ShapeError: If the data is not rank 4 or has a zero-sized dimension
        NumericalError: If the data contains NaN or Inf
    """
    arr = np.ascontiguousarray(data, dtype=np.float64)
    check_volume(arr, name)
    return arr


def check_volume(v: np.ndarray, name: str = "volume") -> None:
    """Validate rank, positive dimensions and finiteness of a Volume."""
    if v.ndim != 4:
        raise ShapeError(f"{name} must have rank 4 (C, D, H, W), got shape {v.shape}")
    if any(d < 1 for d in v.shape):
        raise ShapeError(f"{name} has a zero-sized dimension: {v.shape}")
    check_finite(v, name)


def check_finite(v: np.ndarray, name: str = "array") -> None:
    """Raise NumericalError if the array contains NaN or Inf."""
    if not np.all(np.isfinite(v)):
        bad = int(np.size(v) - np.count_nonzero(np.isfinite(v)))
        raise NumericalError(f"{name} contains {bad} non-finite value(s)", term=name)


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    """Raise ShapeError unless both arrays have identical shapes (no broadcasting)."""
    if a.shape != b.shape:
        raise ShapeError(f"{what} must have identical shapes, got {a.shape} and {b.shape}")


def check_divisible(shape: Sequence[int], k: int, what: str) -> None:
    """Raise ShapeError unless every spatial dim of a (C, D, H, W) shape divides by k."""
    spatial = tuple(shape[1:])
    if any(d % k for d in spatial):
        raise ShapeError(f"{what}: spatial dims {spatial} are not divisible by {k}")


def concat_channels(volumes: Sequence[Volume]) -> Volume:
    """Concatenate Volumes along the channel axis; spatial dims must agree."""
    spatial = {v.shape[1:] for v in volumes}
    if len(spatial) != 1:
        raise ShapeError(f"cannot concatenate volumes with spatial dims {sorted(spatial)}")
    return np.concatenate(volumes, axis=0)
