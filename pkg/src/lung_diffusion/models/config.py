"""
Pydantic configuration models for the pipeline.

RunConfig groups one section per stage. Defaults are the desk-scale
profile; RunConfig.full_scale() documents the full-resolution intent.
"""

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ConfigError


class ConditioningMode(str, Enum):
    """Which anatomy the denoiser is conditioned on."""
    UNCOND = "uncond"
    NODULE = "nodule"
    NODULE_LUNG = "nodule+lung"
    NODULE_LUNG_TEXTURE = "nodule+lung+texture"

    @property
    def conditional(self) -> bool:
        return self is not ConditioningMode.UNCOND


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhantomConfig(_Section):
    """
    Procedural lung phantom parameters.

    Geometry fields are fractions of the volume dims: semi-axes of the body
    and lung ellipsoids, and the left/right lung centre offset along x.
    """

    dims: tuple[int, int, int] = Field(default=(64, 64, 64), description="Volume dims (D, H, W)")
    background_intensity: float = Field(default=-1.0, ge=-1.0, le=1.0)
    body_intensity: float = Field(default=0.1, ge=-1.0, le=1.0)
    lung_intensity: float = Field(default=-0.7, ge=-1.0, le=1.0)
    solid_intensity: float = Field(default=0.3, ge=-1.0, le=1.0)
    nodule_count: tuple[int, int] = Field(default=(0, 3), description="Inclusive nodule count range")
    nodule_rate: Optional[float] = Field(
        default=None, gt=0, description="Poisson mean nodule count, clipped to nodule_count"
    )
    nodule_radius: tuple[float, float] = Field(default=(2.0, 6.0), description="Radius range in voxels")
    edge_sigma: float = Field(default=1.0, gt=0, description="Gaussian edge softness in voxels")
    body_semi_axes: tuple[float, float, float] = (0.46, 0.40, 0.46)
    lung_semi_axes: tuple[float, float, float] = (0.34, 0.26, 0.18)
    lung_offset: float = Field(default=0.21, gt=0, lt=0.5)
    jitter: float = Field(default=0.05, ge=0, lt=0.5, description="Relative geometric jitter per seed")

    @field_validator("dims")
    @classmethod
    def validate_dims(cls, v: tuple[int, int, int]) -> tuple[int, int, int]:
        if any(d < 8 for d in v):
            raise ValueError(f"phantom dims must be >= 8, got {v}")
        return v

    @model_validator(mode="after")
    def validate_ranges(self) -> "PhantomConfig":
        lo, hi = self.nodule_count
        if not 0 <= lo <= hi:
            raise ValueError(f"invalid nodule count range {self.nodule_count}")
        r_lo, r_hi = self.nodule_radius
        if not 0 < r_lo <= r_hi:
            raise ValueError(f"invalid nodule radius range {self.nodule_radius}")
        if r_hi >= self.min_lung_semi_axis():
            raise ValueError(
                f"max nodule radius {r_hi} must be below half the lung minor axis "
                f"({self.min_lung_semi_axis():.2f} voxels)"
            )
        return self

    def min_lung_semi_axis(self) -> float:
        """Smallest lung semi-axis (voxels) after worst-case jitter."""
        return min(f * d for f, d in zip(self.lung_semi_axes, self.dims)) * (1.0 - self.jitter)


class VaeConfig(_Section):
    """3D VAE architecture and loss weights."""

    levels: int = Field(default=3, description="Resolution levels; 2^(levels-1) = compression")
    blocks_per_level: int = Field(default=1, ge=1)
    widths: tuple[int, ...] = Field(default=(16, 32, 64), description="Channels per level")
    latent_channels: int = 4
    compression: int = 4
    groups: int = Field(default=8, ge=1)
    w_mae: float = Field(default=1.0, ge=0)
    w_lpips: float = Field(default=1.0, ge=0)
    w_adv: float = Field(default=0.1, ge=0)
    w_kl: float = Field(default=1e-6, ge=0)
    adv_warmup_steps: int = Field(default=1000, ge=0)
    perceptual_widths: tuple[int, ...] = (8, 16, 32)
    perceptual_seed: int = 0
    disc_widths: tuple[int, ...] = (16, 32, 64)

    @model_validator(mode="after")
    def validate_architecture(self) -> "VaeConfig":
        if self.latent_channels != 4:
            raise ValueError("latent channels are fixed at 4")
        if self.compression != 4:
            raise ValueError("spatial compression is fixed at 4")
        if 2 ** (self.levels - 1) != self.compression:
            raise ValueError(f"{self.levels} levels give {2 ** (self.levels - 1)}x compression, need 4x")
        if len(self.widths) != self.levels:
            raise ValueError(f"expected {self.levels} widths, got {len(self.widths)}")
        for w in self.widths:
            if w % min(self.groups, w):
                raise ValueError(f"group count {self.groups} does not divide width {w}")
        return self


class UnetConfig(_Section):
    """Denoiser U-Net architecture."""

    levels: int = Field(default=3, ge=1, description="Resolution levels (5 at full scale)")
    blocks_per_level: int = Field(default=2, ge=1)
    base_channels: int = Field(default=32, ge=1)
    max_channels: int = Field(default=128, ge=1)
    latent_channels: int = 4
    conditional: bool = True
    attention_levels: Optional[tuple[int, ...]] = Field(
        default=None, description="Levels with cross-attention; None = the two coarsest"
    )
    context_dim: int = Field(default=64, ge=1)
    attention_width: int = Field(default=64, ge=1)
    heads: int = Field(default=1, ge=1)
    token_grid: int = Field(default=4, ge=1)
    groups: int = Field(default=8, ge=1)

    @model_validator(mode="after")
    def validate_architecture(self) -> "UnetConfig":
        if self.attention_width % self.heads:
            raise ValueError(f"{self.heads} heads do not divide attention width {self.attention_width}")
        if not self.conditional and self.attention_levels:
            raise ValueError("an unconditional U-Net cannot have attention levels")
        for level in self.attention_levels or ():
            if not 0 <= level < self.levels:
                raise ValueError(f"attention level {level} outside 0..{self.levels - 1}")
        for w in self.channels():
            if w % min(self.groups, w):
                raise ValueError(f"group count {self.groups} does not divide width {w}")
        return self

    def channels(self) -> list[int]:
        """Channel width per level: base doubling per level, capped."""
        return [min(self.base_channels * 2 ** i, self.max_channels) for i in range(self.levels)]

    def resolved_attention_levels(self) -> tuple[int, ...]:
        if not self.conditional:
            return ()
        if self.attention_levels is not None:
            return tuple(sorted(set(self.attention_levels)))
        return tuple(range(max(0, self.levels - 2), self.levels))

    def input_channels(self) -> int:
        return self.latent_channels + (1 if self.conditional else 0)


class DiffusionConfig(_Section):
    """Noise schedule and loss weighting."""

    num_timesteps: int = Field(default=1000, ge=2)
    beta_start: float = Field(default=1e-4, gt=0, lt=1)
    beta_end: float = Field(default=0.02, gt=0, lt=1)
    min_snr_gamma: float = Field(default=5.0, gt=0)
    standardize_latents: bool = True
    clamp_x0_std: Optional[float] = Field(default=None, gt=0, description="Debug clamp of x0 in latent stds")

    @model_validator(mode="after")
    def validate_betas(self) -> "DiffusionConfig":
        if not self.beta_start < self.beta_end:
            raise ValueError(f"beta_start {self.beta_start} must be below beta_end {self.beta_end}")
        return self


class TrainConfig(_Section):
    """Optimizer and checkpoint cadence."""

    lr_vae: float = Field(default=1e-4, ge=0)
    lr_unet: float = Field(default=1e-5, ge=0)
    weight_decay: float = Field(default=0.0, ge=0)
    steps: int = Field(default=1000, ge=1)
    checkpoint_every: int = Field(default=500, ge=1)
    batch_size: int = Field(default=1, ge=1, le=1)


class EvalConfig(_Section):
    """Evaluation knobs."""

    pairs: int = Field(default=16, ge=1)
    extractor_seed: int = Field(default=1, ge=0)
    extractor_widths: tuple[int, ...] = (16, 32, 64)


class RunConfig(_Section):
    """
    Complete pipeline configuration.

    Example:
        config = RunConfig.from_json_file(Path("run.json"))
        print(config_hash(config))
    """

    data: PhantomConfig = PhantomConfig()
    vae: VaeConfig = VaeConfig()
    unet: UnetConfig = UnetConfig()
    diffusion: DiffusionConfig = DiffusionConfig()
    train: TrainConfig = TrainConfig()
    eval: EvalConfig = EvalConfig()
    seed: int = Field(default=0, ge=0, lt=2**64)
    mode: ConditioningMode = ConditioningMode.NODULE_LUNG_TEXTURE

    @model_validator(mode="after")
    def validate_mode(self) -> "RunConfig":
        if self.unet.conditional != self.mode.conditional:
            raise ValueError(
                f"unet.conditional={self.unet.conditional} conflicts with conditioning mode '{self.mode.value}'"
            )
        return self

    @classmethod
    def desk(cls) -> "RunConfig":
        """Desk-scale profile: 64³ volumes, 16³ latents, 3-level U-Net."""
        return cls()

    @classmethod
    def full_scale(cls) -> "RunConfig":
        """Full-resolution profile (256³, 5 levels); documentation of intent."""
        return cls(
            data=PhantomConfig(dims=(256, 256, 256), nodule_radius=(4.0, 16.0), edge_sigma=2.0),
            unet=UnetConfig(levels=5, base_channels=64, max_channels=256),
        )

    @classmethod
    def from_json_file(cls, path: Path) -> "RunConfig":
        """
        Load a RunConfig from JSON; missing sections take defaults.

        Raises:
            ConfigError: If the file is unreadable or fails validation
        """
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"invalid configuration: {e}")

    def with_mode(self, mode: ConditioningMode) -> "RunConfig":
        """Copy with the conditioning mode (and the U-Net's conditional flag) replaced."""
        unet = self.unet.model_copy(
            update={
                "conditional": mode.conditional,
                "attention_levels": self.unet.attention_levels if mode.conditional else None,
            }
        )
        return self.model_copy(update={"mode": mode, "unet": unet})

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        return self if seed is None else self.model_copy(update={"seed": seed})

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def canonical_json(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(*sections: BaseModel | str) -> str:
    """
    SHA-256 hex digest over the canonical JSON of one or more sections.

    Strings (e.g. a conditioning mode) are hashed as given.
    """
    payload = [s if isinstance(s, str) else s.model_dump(mode="json") for s in sections]
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def vae_config_hash(config: RunConfig) -> str:
    """Hash binding VAE checkpoints to the VAE section."""
    return config_hash(config.vae)


def unet_config_hash(config: RunConfig) -> str:
    """Hash binding U-Net checkpoints to the U-Net and diffusion sections plus mode."""
    return config_hash(config.unet, config.diffusion, config.mode.value)
