"""
Frozen, seeded convolutional feature pyramid.

Serves as the perceptual network of the VAE loss and as the default
feature extractor of the evaluation metrics. Weights are drawn once from
the seed and never trained.
"""

from typing import Any, Sequence

import numpy as np

from ..core import Rng, Volume
from .layers import Conv3d, SiLU
from .params import ParamSet


class FeaturePyramid:
    """
    Stack of stride-2 3x3x3 convolutions with SiLU, one feature map per stage.

    Attributes:
        seed: Seed the weights were drawn from
        widths: Channel width of each stage
        params: Frozen parameter set

    Example:
        pyramid = FeaturePyramid(widths=(8, 16, 32), seed=0)
        features, cache = pyramid.forward(volume)
    """

    def __init__(self, widths: Sequence[int] = (8, 16, 32), seed: int = 0, in_channels: int = 1):
        self.seed = seed
        self.widths = tuple(widths)
        self.params = ParamSet(frozen=True)
        rng = Rng(seed).spawn("pyramid")
        self.stages: list[Conv3d] = []
        channels = in_channels
        for i, width in enumerate(self.widths):
            self.stages.append(Conv3d(self.params, f"stage{i}", channels, width, rng, kernel=3, stride=2, padding=1))
            channels = width
        self.act = SiLU()

    def forward(self, x: Volume) -> tuple[list[Volume], Any]:
        features = []
        caches = []
        h = x
        for stage in self.stages:
            h, c_conv = stage.forward(h)
            h, c_act = self.act.forward(h)
            features.append(h)
            caches.append((c_conv, c_act))
        return features, caches

    def backward(self, caches: Any, grads: Sequence[Volume | None]) -> Volume:
        """Input gradient given upstream gradients for each stage's features (None = zero)."""
        g = None
        for stage, (c_conv, c_act), g_level in reversed(list(zip(self.stages, caches, grads))):
            if g_level is not None:
                g = g_level if g is None else g + g_level
            if g is None:
                continue
            g = self.act.backward(c_act, g)
            g = stage.backward(c_conv, g)
        if g is None:
            raise ValueError("no upstream gradient supplied to the feature pyramid")
        return g


def normalize_channels(f: Volume, eps: float = 1e-10) -> tuple[Volume, Any]:
    """Unit-normalize the channel vector at every voxel."""
    norm = np.sqrt((f * f).sum(axis=0, keepdims=True) + eps)
    n = f / norm
    return n, (n, norm)


def normalize_channels_backward(cache: Any, grad_n: Volume) -> Volume:
    n, norm = cache
    return (grad_n - n * (grad_n * n).sum(axis=0, keepdims=True)) / norm
