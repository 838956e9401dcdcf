"""
Neural building blocks with hand-derived backward passes, AdamW,
finite-difference gradient checking and checkpoint I/O.
"""

from .blocks import CrossAttention, ResBlock, TimeEmbedding, softmax_rows, time_embedding
from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, read_checkpoint_meta, save_checkpoint
from .gradcheck import GradCheckReport, TensorCheck, grad_check, relative_error
from .layers import (
    Conv3d,
    Downsample,
    GroupNorm,
    LayerKind,
    LayerSpec,
    LeakyReLU,
    Linear,
    SiLU,
    Upsample,
)
from .optim import AdamWConfig, adamw_step, apply_adamw, check_grads
from .params import ParamSet
from .pyramid import FeaturePyramid, normalize_channels, normalize_channels_backward

__all__ = [
    "CrossAttention",
    "ResBlock",
    "TimeEmbedding",
    "softmax_rows",
    "time_embedding",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "read_checkpoint_meta",
    "save_checkpoint",
    "GradCheckReport",
    "TensorCheck",
    "grad_check",
    "relative_error",
    "Conv3d",
    "Downsample",
    "GroupNorm",
    "LayerKind",
    "LayerSpec",
    "LeakyReLU",
    "Linear",
    "SiLU",
    "Upsample",
    "AdamWConfig",
    "adamw_step",
    "apply_adamw",
    "check_grads",
    "ParamSet",
    "FeaturePyramid",
    "normalize_channels",
    "normalize_channels_backward",
]
