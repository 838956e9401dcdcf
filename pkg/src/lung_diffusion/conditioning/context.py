"""
Cross-attention context tokens from a downsampled mask.

The mask latent is average-pooled to a token grid (4x4x4 by default, clamped
to the available dims); each scalar becomes s * w + b + pos[cell].
"""

from typing import Any

import numpy as np

from ..core import Rng, Volume, check_volume
from ..errors import ShapeError
from ..nn.layers import LayerKind, LayerSpec, require_cache
from ..nn.params import ParamSet

DEFAULT_TOKEN_GRID = 4


def token_grid(spatial: tuple[int, ...], grid: int = DEFAULT_TOKEN_GRID) -> tuple[int, int, int]:
    """Per-axis token counts: grid, or the axis length when smaller."""
    return tuple(min(grid, d) for d in spatial)


def token_scalars(downsampled: Volume, grid: int = DEFAULT_TOKEN_GRID) -> tuple[np.ndarray, np.ndarray]:
    """
    Average-pool a (1, d, h, w) mask latent onto the token grid.

    Returns:
        tuple: (scalars (n,), flat position index of each token in the full
            grid x grid x grid table), both in z-major order

    Raises:
        ShapeError: If a dim is not a multiple of its token count
    """
    check_volume(downsampled, "mask latent")
    if downsampled.shape[0] != 1:
        raise ShapeError(f"mask latent must have one channel, got {downsampled.shape[0]}")
    spatial = downsampled.shape[1:]
    counts = token_grid(spatial, grid)
    for d, g in zip(spatial, counts):
        if d % g:
            raise ShapeError(f"mask latent dims {spatial} do not divide into a {counts} token grid")
    gz, gy, gx = counts
    kz, ky, kx = (d // g for d, g in zip(spatial, counts))
    scalars = downsampled[0].reshape(gz, kz, gy, ky, gx, kx).mean(axis=(1, 3, 5)).reshape(-1)
    z, y, x = np.meshgrid(np.arange(gz), np.arange(gy), np.arange(gx), indexing="ij")
    positions = ((z * grid + y) * grid + x).reshape(-1)
    return scalars, positions


class ContextEmbedder:
    """Learned affine token embedding plus a per-position embedding table."""

    def __init__(
        self,
        params: ParamSet,
        name: str,
        context_dim: int,
        rng: Rng,
        grid: int = DEFAULT_TOKEN_GRID,
    ):
        self.params = params
        self.name = name
        self.context_dim = context_dim
        self.grid = grid
        self.spec = LayerSpec(LayerKind.CONTEXT_EMBED, channels=1, embed_dim=context_dim)
        stream = rng.spawn(name)
        self.weight = params.add(f"{name}.weight", stream.spawn("weight").normal((context_dim,)))
        self.bias = params.add(f"{name}.bias", np.zeros(context_dim))
        self.position = params.add(
            f"{name}.position", 0.02 * stream.spawn("position").normal((grid ** 3, context_dim))
        )

    def forward(self, downsampled: Volume) -> tuple[np.ndarray, Any]:
        scalars, positions = token_scalars(downsampled, self.grid)
        tokens = (
            scalars[:, None] * self.params[self.weight][None, :]
            + self.params[self.bias][None, :]
            + self.params[self.position][positions]
        )
        return tokens, (scalars, positions)

    def backward(self, cache: Any, grad_tokens: np.ndarray) -> None:
        require_cache(cache, self)
        scalars, positions = cache
        self.params.accumulate(self.weight, scalars @ grad_tokens)
        self.params.accumulate(self.bias, grad_tokens.sum(axis=0))
        grad_pos = np.zeros_like(self.params[self.position])
        np.add.at(grad_pos, positions, grad_tokens)
        self.params.accumulate(self.position, grad_pos)


def build_context(downsampled: Volume, embedder: ContextEmbedder) -> np.ndarray:
    """(n_tokens, context_dim) context for cross-attention."""
    tokens, _ = embedder.forward(downsampled)
    return tokens
