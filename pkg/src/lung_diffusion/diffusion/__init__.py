"""Noise schedule, v-prediction objectives, training and ancestral sampling."""

from .objectives import (
    diffusion_loss,
    min_snr_weight,
    predict_eps,
    predict_x0,
    q_sample,
    v_target,
)
from .pipeline import Generator, SampleJob, check_mask_for_mode, generate_samples, plan_jobs
from .sampler import ddpm_step, sample, sample_stream
from .schedule import NoiseSchedule, linear_schedule, schedule_from_config
from .trainer import (
    DiffusionStepResult,
    DiffusionTrainer,
    TrainingData,
    config_for_checkpoint,
    load_unet,
    prepare_training_data,
)

__all__ = [
    "diffusion_loss",
    "min_snr_weight",
    "predict_eps",
    "predict_x0",
    "q_sample",
    "v_target",
    "Generator",
    "SampleJob",
    "check_mask_for_mode",
    "generate_samples",
    "plan_jobs",
    "ddpm_step",
    "sample",
    "sample_stream",
    "NoiseSchedule",
    "linear_schedule",
    "schedule_from_config",
    "DiffusionStepResult",
    "DiffusionTrainer",
    "TrainingData",
    "config_for_checkpoint",
    "load_unet",
    "prepare_training_data",
]
