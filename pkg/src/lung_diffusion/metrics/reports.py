"""
Fidelity (FID) and diversity (MS-SSIM) reports over manifest-indexed sets.
"""

import logging
from typing import Optional

import numpy as np

from ..core import Rng
from ..data import read_volume
from ..errors import ShapeError
from ..models import DatasetManifest, FidReport, MsSsimReport, RunConfig, config_hash
from ..utils import build_id, parallel_map
from .features import FeatureExtractor, PyramidExtractor, extract_features
from .frechet import frechet_distance, gaussian_stats
from .ssim import ms_ssim3d

logger = logging.getLogger(__name__)


def load_volumes(manifest: DatasetManifest, workers: int = 1) -> list[np.ndarray]:
    return parallel_map(read_volume, manifest.volume_paths(), workers)


def default_extractor(config: RunConfig) -> PyramidExtractor:
    return PyramidExtractor(seed=config.eval.extractor_seed, widths=config.eval.extractor_widths)


def fid_report(
    real: DatasetManifest,
    synth: DatasetManifest,
    config: RunConfig,
    extractor: Optional[FeatureExtractor] = None,
    workers: int = 1,
) -> FidReport:
    """
    Fréchet distance between feature statistics of a real and a synthetic set.

    Args:
        real: Manifest of the reference set (n >= 2)
        synth: Manifest of the generated set (n >= 2)
        config: Run configuration (stamps the report, picks the default extractor)
        extractor: Feature extractor; the seeded pyramid when omitted
        workers: Feature extraction threads

    Returns:
        FidReport: Distance raw and scaled by 10^3

    Raises:
        ValueError: If either set has fewer than two volumes
        ShapeError: If the two sets hold volumes of different shapes
    """
    for name, manifest in (("real", real), ("synthetic", synth)):
        if len(manifest) < 2:
            raise ValueError(f"{name} set needs at least 2 volumes, got {len(manifest)}")
    extractor = extractor or default_extractor(config)

    real_volumes = load_volumes(real, workers)
    synth_volumes = load_volumes(synth, workers)
    if real_volumes[0].shape != synth_volumes[0].shape:
        raise ShapeError(f"real volumes are {real_volumes[0].shape}, synthetic are {synth_volumes[0].shape}")

    logger.info("Extracting features for %d real and %d synthetic volumes", len(real_volumes), len(synth_volumes))
    real_stats = gaussian_stats(extract_features(real_volumes, extractor, workers))
    synth_stats = gaussian_stats(extract_features(synth_volumes, extractor, workers))
    value = frechet_distance(real_stats, synth_stats)

    return FidReport(
        value=value,
        value_x1e3=value * 1e3,
        n_real=len(real_volumes),
        n_synth=len(synth_volumes),
        extractor=extractor.info(),
        config_hash=config_hash(config),
        seed=config.seed,
        build_id=build_id(),
    )


def msssim_report(
    manifest: DatasetManifest,
    config: RunConfig,
    pairs: Optional[int] = None,
    seed: Optional[int] = None,
    workers: int = 1,
) -> MsSsimReport:
    """
    Mean MS-SSIM over random distinct pairs of one set (lower = more diverse).

    Pairs are drawn without repetition until every pair has been used,
    then the draw cycles.

    Raises:
        ValueError: If the set has fewer than two volumes
    """
    if len(manifest) < 2:
        raise ValueError(f"MS-SSIM diversity needs at least 2 volumes, got {len(manifest)}")
    pairs = pairs if pairs is not None else config.eval.pairs
    seed = seed if seed is not None else config.seed
    chosen = Rng(seed).spawn("msssim").choice_pairs(len(manifest), pairs)
    volumes = load_volumes(manifest, workers)

    def score(pair: tuple[int, int]) -> tuple[float, list[float]]:
        per_scale: list[float] = []
        value = ms_ssim3d(volumes[pair[0]], volumes[pair[1]], per_scale=per_scale)
        return value, per_scale

    results = parallel_map(score, chosen, workers)
    values = [value for value, _ in results]
    per_scale = np.mean([scales for _, scales in results], axis=0)
    return MsSsimReport(
        value=float(np.mean(values)),
        pairs=len(chosen),
        n_synth=len(manifest),
        scales=int(per_scale.size),
        per_scale=[float(s) for s in per_scale],
        config_hash=config_hash(config),
        seed=seed,
        build_id=build_id(),
    )
