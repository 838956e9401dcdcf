"""
3D SSIM and multi-scale SSIM with an 11-tap Gaussian window (sigma 1.5).

Local statistics are computed by separable correlation over the valid
region only (no padding), so every statistic uses a full window.
"""

from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.ndimage import correlate1d

from ..core import Volume, avg_pool3d, check_same_shape, check_volume
from ..errors import ShapeError

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
DATA_RANGE = 2.0
K1 = 0.01
K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian taps."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(v: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Separable 3-D correlation cropped to positions with a full window."""
    r = window.size // 2
    out = v
    for axis in range(3):
        out = correlate1d(out, window, axis=axis, mode="reflect")
    return out[r:-r, r:-r, r:-r] if r else out


class SsimTerms(NamedTuple):
    ssim: float
    cs: float


def _spatial(x: Volume, name: str) -> np.ndarray:
    check_volume(x, name)
    if x.shape[0] != 1:
        raise ShapeError(f"{name}: SSIM expects a single channel, got {x.shape[0]}")
    return x[0]


def ssim_terms(
    x: Volume,
    y: Volume,
    window_size: int = WINDOW_SIZE,
    sigma: float = WINDOW_SIGMA,
    data_range: float = DATA_RANGE,
) -> SsimTerms:
    """
    Mean SSIM and mean contrast-structure term over the valid region.

    Raises:
        ShapeError: If shapes differ, inputs are multi-channel, or a dim is below the window size
    """
    check_same_shape(x, y, "SSIM inputs")
    a, b = _spatial(x, "x"), _spatial(y, "y")
    if min(a.shape) < window_size:
        raise ShapeError(f"SSIM needs every dim >= {window_size}, got {a.shape}")
    window = gaussian_window(window_size, sigma)
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2

    mu_a = _filter_valid(a, window)
    mu_b = _filter_valid(b, window)
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    mu_ab = mu_a * mu_b
    var_a = _filter_valid(a * a, window) - mu_aa
    var_b = _filter_valid(b * b, window) - mu_bb
    cov = _filter_valid(a * b, window) - mu_ab

    cs_map = (2.0 * cov + c2) / (var_a + var_b + c2)
    luminance = (2.0 * mu_ab + c1) / (mu_aa + mu_bb + c1)
    return SsimTerms(ssim=float((luminance * cs_map).mean()), cs=float(cs_map.mean()))


def ssim3d(x: Volume, y: Volume, window_size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> float:
    """Mean SSIM index of two single-channel volumes; symmetric in (x, y)."""
    return ssim_terms(x, y, window_size, sigma).ssim


def usable_scales(spatial: Sequence[int], max_scales: int, window_size: int = WINDOW_SIZE) -> int:
    """Scales for which the smallest dim stays >= the window size after halving."""
    smallest = min(spatial)
    scales = 0
    while scales < max_scales and smallest // (2 ** scales) >= window_size:
        scales += 1
    return scales


def _halve(v: Volume) -> Volume:
    even = tuple(d - d % 2 for d in v.shape[1:])
    return avg_pool3d(v[:, : even[0], : even[1], : even[2]], 2)


def ms_ssim3d(
    x: Volume,
    y: Volume,
    weights: Optional[Sequence[float]] = None,
    per_scale: Optional[list[float]] = None,
) -> float:
    """
    Multi-scale SSIM in [0, 1].

    The scale count drops until the coarsest scale still fits the window;
    weights of the used scales are renormalized to sum to 1. Contrast-structure
    terms are clamped at 0; the coarsest scale contributes its full SSIM.

    Args:
        x, y: Single-channel volumes of equal shape
        weights: Per-scale exponents (default: the standard five)
        per_scale: If given, receives the clamped term of each scale

    Raises:
        ShapeError: If not even one scale fits the window
    """
    check_same_shape(x, y, "MS-SSIM inputs")
    weights = tuple(weights or MS_SSIM_WEIGHTS)
    scales = usable_scales(x.shape[1:], len(weights))
    if scales < 1:
        raise ShapeError(f"MS-SSIM needs every dim >= {WINDOW_SIZE}, got {x.shape[1:]}")
    used = np.asarray(weights[:scales], dtype=np.float64)
    used = used / used.sum()

    result = 1.0
    for scale in range(scales):
        terms = ssim_terms(x, y)
        value = terms.ssim if scale == scales - 1 else terms.cs
        value = max(value, 0.0)
        if per_scale is not None:
            per_scale.append(value)
        result *= value ** used[scale]
        if scale < scales - 1:
            x, y = _halve(x), _halve(y)
    return float(min(result, 1.0))
