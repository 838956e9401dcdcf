"""Conditional 3D U-Net denoiser with additive skips and cross-attention."""

from .model import DenoiseInput, DenoiserUnet, additive_skip_merge

__all__ = ["DenoiseInput", "DenoiserUnet", "additive_skip_merge"]
