"""
Report and log-entry models.

Every report is stamped with the config hash, seed and build id of the run
that produced it so numbers can be traced back to their inputs.
"""

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class ArtifactStamp(BaseModel):
    """Provenance fields shared by reports and checkpoint metadata."""

    config_hash: str
    seed: int
    build_id: str


class ExtractorInfo(BaseModel):
    seed: int
    widths: list[int]
    dim: int = Field(..., description="Feature vector length")


class FidReport(ArtifactStamp):
    metric: Literal["fid"] = "fid"
    value: float = Field(..., ge=0)
    value_x1e3: float = Field(..., ge=0, description="FID scaled by 10^3 for display")
    n_real: int
    n_synth: int
    extractor: ExtractorInfo


class MsSsimReport(ArtifactStamp):
    metric: Literal["ms_ssim"] = "ms_ssim"
    value: float
    pairs: int
    n_synth: int
    scales: int
    per_scale: list[float] = Field(default_factory=list, description="Mean SSIM term per scale")


class VaeLossBreakdown(BaseModel):
    """Unweighted loss terms for one VAE step."""

    model_config = ConfigDict(frozen=True)

    mae: float
    lpips: float
    adv_g: float
    adv_d: float
    kl: float


class VaeLogEntry(VaeLossBreakdown):
    step: int


class DiffusionLogEntry(BaseModel):
    step: int
    loss: float
    t: int
    skipped: bool = False


class LatentStats(BaseModel):
    """Per-channel latent mean/std used to standardize diffusion inputs."""

    model_config = ConfigDict(frozen=True)

    mean: list[float]
    std: list[float]


class CheckpointMeta(ArtifactStamp):
    """JSON sidecar written next to every checkpoint."""

    kind: Literal["vae", "unet"]
    step: int = Field(..., ge=0)
    attempts: Optional[int] = Field(default=None, ge=0, description="Training draws consumed, skipped steps included")
    mode: Optional[str] = None
    latent_stats: Optional[LatentStats] = None
    section: dict = Field(default_factory=dict, description="Config sections the hash covers")
