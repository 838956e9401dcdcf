"""Mask encoding, latent-grid downsampling and cross-attention context."""

from ..models.config import ConditioningMode
from .context import ContextEmbedder, build_context, token_scalars
from .masks import (
    codebook,
    concat_condition,
    downsample_mask,
    encode_mask,
    prepare_mask_latent,
    texture_sweep,
)

__all__ = [
    "ConditioningMode",
    "ContextEmbedder",
    "build_context",
    "token_scalars",
    "codebook",
    "concat_condition",
    "downsample_mask",
    "encode_mask",
    "prepare_mask_latent",
    "texture_sweep",
]
