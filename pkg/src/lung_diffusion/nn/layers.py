"""
Primitive layers with hand-derived backward passes.

Every layer follows the same protocol:

    y, cache = layer.forward(x)
    grad_x = layer.backward(cache, grad_y)

forward never mutates parameters; backward accumulates parameter gradients
into the owning ParamSet and returns the gradient with respect to the input.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

import numpy as np
from scipy.special import expit

from ..core import Rng, Volume, check_volume, conv3d, conv3d_backward, upsample_nearest3d, upsample_nearest3d_backward
from ..errors import ShapeError
from .params import ParamSet

DEFAULT_GROUPS = 8
GROUPNORM_EPS = 1e-5


class LayerKind(str, Enum):
    """Kinds of layers the networks are assembled from."""
    CONV = "conv"
    GROUPNORM = "groupnorm"
    SILU = "silu"
    LEAKY_RELU = "leaky-relu"
    RESIDUAL_BLOCK = "residual-block"
    CROSS_ATTENTION = "cross-attention"
    TIME_EMBED = "time-embed"
    LINEAR = "linear"
    DOWNSAMPLE = "downsample"
    UPSAMPLE = "upsample"
    CONTEXT_EMBED = "context-embed"


@dataclass(frozen=True)
class LayerSpec:
    """
    Layer kind plus hyperparameters.

    Raises:
        ShapeError: If groups do not divide channels or heads do not divide
            the attention width
    """

    kind: LayerKind
    channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    groups: int = 0
    heads: int = 0
    embed_dim: int = 0

    def __post_init__(self):
        if self.kind == LayerKind.GROUPNORM and self.channels % self.groups:
            raise ShapeError(f"group count {self.groups} does not divide {self.channels} channels")
        if self.kind == LayerKind.CROSS_ATTENTION and self.embed_dim % self.heads:
            raise ShapeError(f"head count {self.heads} does not divide attention width {self.embed_dim}")


def init_weight(rng: Rng, shape: tuple[int, ...], fan_in: int, zero: bool = False) -> np.ndarray:
    """Weights ~ N(0, 1/sqrt(fan_in)), or zeros for the last layer of a residual branch."""
    if zero:
        return np.zeros(shape)
    return rng.normal(shape) / np.sqrt(fan_in)


def require_cache(cache: Any, layer: Any) -> None:
    """Reject a backward call that was not preceded by a forward pass."""
    if cache is None:
        name = getattr(layer, "name", type(layer).__name__)
        raise ValueError(f"{name}: backward called without saved activations")


def resolve_groups(channels: int, groups: int = DEFAULT_GROUPS) -> int:
    """Clamp the group count to the channel count."""
    return min(groups, channels)


class Linear:
    """Affine map y = x W^T + b over the last axis (1-D or 2-D inputs)."""

    def __init__(
        self,
        params: ParamSet,
        name: str,
        in_features: int,
        out_features: int,
        rng: Rng,
        bias: bool = True,
        zero_init: bool = False,
    ):
        self.params = params
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.spec = LayerSpec(LayerKind.LINEAR, channels=in_features, out_channels=out_features)
        self.weight = params.add(
            f"{name}.weight",
            init_weight(rng.spawn(name), (out_features, in_features), in_features, zero_init),
        )
        self.bias = params.add(f"{name}.bias", np.zeros(out_features)) if bias else None

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Any]:
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"{self.name}: expected last dim {self.in_features}, got shape {x.shape}")
        y = x @ self.params[self.weight].T
        if self.bias is not None:
            y = y + self.params[self.bias]
        return y, x

    def backward(self, cache: Any, grad_y: np.ndarray) -> np.ndarray:
        require_cache(cache, self)
        x = cache
        x2 = x.reshape(-1, self.in_features)
        g2 = grad_y.reshape(-1, self.out_features)
        self.params.accumulate(self.weight, g2.T @ x2)
        if self.bias is not None:
            self.params.accumulate(self.bias, g2.sum(axis=0))
        return (g2 @ self.params[self.weight]).reshape(x.shape)


class Conv3d:
    """3D convolution layer over a single (C, D, H, W) Volume."""

    kind = LayerKind.CONV

    def __init__(
        self,
        params: ParamSet,
        name: str,
        in_channels: int,
        out_channels: int,
        rng: Rng,
        kernel: int = 3,
        stride: int = 1,
        padding: Optional[int] = None,
        zero_init: bool = False,
    ):
        self.params = params
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.padding = kernel // 2 if padding is None else padding
        self.spec = LayerSpec(self.kind, channels=in_channels, out_channels=out_channels, kernel=kernel)
        fan_in = in_channels * kernel ** 3
        self.weight = params.add(
            f"{name}.weight",
            init_weight(rng.spawn(name), (out_channels, in_channels, kernel, kernel, kernel), fan_in, zero_init),
        )
        self.bias = params.add(f"{name}.bias", np.zeros(out_channels))

    def forward(self, x: Volume) -> tuple[Volume, Any]:
        y = conv3d(x, self.params[self.weight], self.params[self.bias], self.stride, self.padding)
        return y, x

    def backward(self, cache: Any, grad_y: Volume) -> Volume:
        require_cache(cache, self)
        grad_x, grad_w, grad_b = conv3d_backward(
            cache, self.params[self.weight], grad_y, self.stride, self.padding
        )
        self.params.accumulate(self.weight, grad_w)
        self.params.accumulate(self.bias, grad_b)
        return grad_x


class Downsample(Conv3d):
    """Stride-2 3x3x3 convolution halving every spatial dim."""

    kind = LayerKind.DOWNSAMPLE

    def __init__(self, params: ParamSet, name: str, in_channels: int, out_channels: int, rng: Rng):
        super().__init__(params, name, in_channels, out_channels, rng, kernel=3, stride=2, padding=1)


class Upsample:
    """Nearest-neighbour 2x upsampling followed by a 3x3x3 convolution."""

    def __init__(self, params: ParamSet, name: str, in_channels: int, out_channels: int, rng: Rng):
        self.conv = Conv3d(params, f"{name}.conv", in_channels, out_channels, rng)
        self.spec = LayerSpec(LayerKind.UPSAMPLE, channels=in_channels, out_channels=out_channels, kernel=3)

    def forward(self, x: Volume) -> tuple[Volume, Any]:
        return self.conv.forward(upsample_nearest3d(x, 2))

    def backward(self, cache: Any, grad_y: Volume) -> Volume:
        require_cache(cache, self)
        return upsample_nearest3d_backward(self.conv.backward(cache, grad_y), 2)


class GroupNorm:
    """
    Group normalization with per-channel affine (gamma, beta).

    A group with zero variance normalizes to zeros, so the output is beta.
    """

    def __init__(
        self,
        params: ParamSet,
        name: str,
        channels: int,
        groups: int = DEFAULT_GROUPS,
        eps: float = GROUPNORM_EPS,
    ):
        self.params = params
        self.name = name
        self.channels = channels
        self.groups = resolve_groups(channels, groups)
        self.eps = eps
        self.spec = LayerSpec(LayerKind.GROUPNORM, channels=channels, groups=self.groups)
        self.gamma = params.add(f"{name}.gamma", np.ones(channels))
        self.beta = params.add(f"{name}.beta", np.zeros(channels))

    def normalize(self, x: Volume) -> tuple[Volume, np.ndarray]:
        """Normalize without the affine; returns (x_hat, inverse std per group)."""
        check_volume(x, f"{self.name} input")
        if x.shape[0] != self.channels:
            raise ShapeError(f"{self.name}: expected {self.channels} channels, got {x.shape[0]}")
        grouped = x.reshape(self.groups, -1)
        mean = grouped.mean(axis=1, keepdims=True)
        centered = grouped - mean
        var = (centered * centered).mean(axis=1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        return (centered * inv_std).reshape(x.shape), inv_std

    def forward(self, x: Volume) -> tuple[Volume, Any]:
        x_hat, inv_std = self.normalize(x)
        gamma = self.params[self.gamma][:, None, None, None]
        beta = self.params[self.beta][:, None, None, None]
        return x_hat * gamma + beta, (x_hat, inv_std)

    def backward(self, cache: Any, grad_y: Volume) -> Volume:
        require_cache(cache, self)
        x_hat, inv_std = cache
        self.params.accumulate(self.gamma, (grad_y * x_hat).sum(axis=(1, 2, 3)))
        self.params.accumulate(self.beta, grad_y.sum(axis=(1, 2, 3)))
        g_hat = (grad_y * self.params[self.gamma][:, None, None, None]).reshape(self.groups, -1)
        xh = x_hat.reshape(self.groups, -1)
        n = xh.shape[1]
        grad = inv_std / n * (
            n * g_hat
            - g_hat.sum(axis=1, keepdims=True)
            - xh * (g_hat * xh).sum(axis=1, keepdims=True)
        )
        return grad.reshape(grad_y.shape)


class SiLU:
    """x * sigmoid(x)."""

    spec = LayerSpec(LayerKind.SILU)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Any]:
        s = expit(x)
        return x * s, (x, s)

    def backward(self, cache: Any, grad_y: np.ndarray) -> np.ndarray:
        require_cache(cache, self)
        x, s = cache
        return grad_y * s * (1.0 + x * (1.0 - s))


class LeakyReLU:
    """max(x, slope * x) for 0 < slope < 1."""

    spec = LayerSpec(LayerKind.LEAKY_RELU)

    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Any]:
        positive = x > 0
        return np.where(positive, x, self.slope * x), positive

    def backward(self, cache: Any, grad_y: np.ndarray) -> np.ndarray:
        require_cache(cache, self)
        return np.where(cache, grad_y, self.slope * grad_y)
