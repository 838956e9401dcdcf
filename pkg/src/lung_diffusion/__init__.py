"""
Lung Diffusion CLI

Desk-scale conditional latent diffusion for 3D chest volumes: a 3D VAE,
a mask-conditioned 3D U-Net trained with v-prediction, and FID / MS-SSIM
evaluation, all on procedurally generated lung phantoms.
"""

__version__ = "0.1.0"
__description__ = "Mask-conditioned 3D latent diffusion on lung phantoms"
