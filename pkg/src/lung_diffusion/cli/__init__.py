"""
CLI command modules for the lung diffusion pipeline.

Contains Typer command groups for each stage:
- phantom: Procedural phantom datasets
- vae: VAE training and reconstruction
- diffusion: U-Net training
- sample: Conditional and unconditional sampling
- evaluate: FID and MS-SSIM reports
- gradcheck: Finite-difference gradient suite
- config: Effective configuration
"""

from . import config, diffusion, evaluate, gradcheck, phantom, sample, vae

__all__ = ["config", "diffusion", "evaluate", "gradcheck", "phantom", "sample", "vae"]
