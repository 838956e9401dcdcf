"""
Feature extraction for the Fréchet distance.

Any object with ``dim``, ``info()`` and ``features(volume)`` can stand in
for the default seeded pyramid, e.g. a pretrained medical backbone.
"""

from typing import Protocol, Sequence

import numpy as np

from ..core import Volume, check_volume
from ..errors import ShapeError
from ..models import ExtractorInfo
from ..nn import FeaturePyramid
from ..utils import parallel_map


class FeatureExtractor(Protocol):
    dim: int

    def info(self) -> ExtractorInfo: ...

    def features(self, volume: Volume) -> np.ndarray: ...


class PyramidExtractor:
    """
    Frozen conv pyramid with global average pooling of the last stage.

    Example:
        extractor = PyramidExtractor(seed=1)
        row = extractor.features(volume)   # shape (64,)
    """

    def __init__(self, seed: int = 1, widths: Sequence[int] = (16, 32, 64)):
        self.pyramid = FeaturePyramid(widths=widths, seed=seed)
        self.seed = seed
        self.widths = tuple(widths)
        self.dim = self.widths[-1]

    def info(self) -> ExtractorInfo:
        return ExtractorInfo(seed=self.seed, widths=list(self.widths), dim=self.dim)

    def features(self, volume: Volume) -> np.ndarray:
        check_volume(volume, "volume")
        stages, _ = self.pyramid.forward(volume)
        return stages[-1].mean(axis=(1, 2, 3))


def extract_features(
    volumes: Sequence[Volume], extractor: FeatureExtractor, workers: int = 1
) -> np.ndarray:
    """
    One feature row per volume, in input order.

    Raises:
        ValueError: If volumes is empty
        ShapeError: If the volumes do not all share one shape
    """
    if len(volumes) == 0:
        raise ValueError("cannot extract features from an empty volume set")
    shape = volumes[0].shape
    for i, v in enumerate(volumes):
        if v.shape != shape:
            raise ShapeError(f"volume {i} has shape {v.shape}, expected {shape}")
    rows = parallel_map(extractor.features, volumes, workers)
    return np.stack(rows, axis=0)
