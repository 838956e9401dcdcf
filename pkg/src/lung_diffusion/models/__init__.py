"""Pydantic models for configuration, dataset records and reports."""

from .config import (
    ConditioningMode,
    DiffusionConfig,
    EvalConfig,
    PhantomConfig,
    RunConfig,
    TrainConfig,
    UnetConfig,
    VaeConfig,
    config_hash,
    unet_config_hash,
    vae_config_hash,
)
from .records import DatasetManifest, ManifestRecord, NoduleRecord, PhantomSidecar
from .reports import (
    ArtifactStamp,
    CheckpointMeta,
    DiffusionLogEntry,
    ExtractorInfo,
    FidReport,
    LatentStats,
    MsSsimReport,
    VaeLogEntry,
    VaeLossBreakdown,
)

__all__ = [
    "ConditioningMode",
    "DiffusionConfig",
    "EvalConfig",
    "PhantomConfig",
    "RunConfig",
    "TrainConfig",
    "UnetConfig",
    "VaeConfig",
    "config_hash",
    "unet_config_hash",
    "vae_config_hash",
    "DatasetManifest",
    "ManifestRecord",
    "NoduleRecord",
    "PhantomSidecar",
    "ArtifactStamp",
    "CheckpointMeta",
    "DiffusionLogEntry",
    "ExtractorInfo",
    "FidReport",
    "LatentStats",
    "MsSsimReport",
    "VaeLogEntry",
    "VaeLossBreakdown",
]
