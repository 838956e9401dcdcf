"""Generation quality metrics: SSIM/MS-SSIM diversity and Fréchet fidelity."""

from .features import FeatureExtractor, PyramidExtractor, extract_features
from .frechet import GaussianStats, frechet_distance, gaussian_stats
from .reports import default_extractor, fid_report, load_volumes, msssim_report
from .ssim import MS_SSIM_WEIGHTS, gaussian_window, ms_ssim3d, ssim3d, ssim_terms, usable_scales

__all__ = [
    "FeatureExtractor",
    "PyramidExtractor",
    "extract_features",
    "GaussianStats",
    "gaussian_stats",
    "frechet_distance",
    "fid_report",
    "msssim_report",
    "default_extractor",
    "load_volumes",
    "MS_SSIM_WEIGHTS",
    "gaussian_window",
    "ssim3d",
    "ssim_terms",
    "ms_ssim3d",
    "usable_scales",
]
