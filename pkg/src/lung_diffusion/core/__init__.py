"""
Deterministic dense-tensor arithmetic for 3D data.

Volumes are float64 numpy arrays shaped (channels, depth, height, width).
"""

from .linalg import psd_sqrt, sym_eig
from .ops import (
    avg_pool3d,
    avg_pool3d_backward,
    conv3d,
    conv3d_backward,
    conv_output_dim,
    max_pool3d,
    upsample_nearest3d,
    upsample_nearest3d_backward,
)
from .rng import Rng
from .volume import (
    Volume,
    as_volume,
    check_divisible,
    check_finite,
    check_same_shape,
    check_volume,
    concat_channels,
)

__all__ = [
    "Volume",
    "as_volume",
    "check_divisible",
    "check_finite",
    "check_same_shape",
    "check_volume",
    "concat_channels",
    "conv3d",
    "conv3d_backward",
    "conv_output_dim",
    "max_pool3d",
    "avg_pool3d",
    "avg_pool3d_backward",
    "upsample_nearest3d",
    "upsample_nearest3d_backward",
    "sym_eig",
    "psd_sqrt",
    "Rng",
]
