"""
Forward noising, velocity targets and the Min-SNR-weighted loss.

    z_t = sqrt(ab) * x0 + sqrt(1 - ab) * eps
    v   = sqrt(ab) * eps - sqrt(1 - ab) * x0
    x0  = sqrt(ab) * z_t - sqrt(1 - ab) * v
    eps = sqrt(1 - ab) * z_t + sqrt(ab) * v
"""

import numpy as np

from ..core import Volume, check_same_shape
from .schedule import NoiseSchedule


def _coefficients(schedule: NoiseSchedule, t: int) -> tuple[float, float]:
    t = schedule.check_t(t)
    return float(schedule.sqrt_alpha_bars[t]), float(schedule.sqrt_one_minus_alpha_bars[t])


def q_sample(x0: Volume, t: int, eps: Volume, schedule: NoiseSchedule) -> Volume:
    check_same_shape(x0, eps, "x0 and noise")
    a, s = _coefficients(schedule, t)
    return a * x0 + s * eps


def v_target(x0: Volume, eps: Volume, t: int, schedule: NoiseSchedule) -> Volume:
    check_same_shape(x0, eps, "x0 and noise")
    a, s = _coefficients(schedule, t)
    return a * eps - s * x0


def predict_x0(z_t: Volume, v: Volume, t: int, schedule: NoiseSchedule) -> Volume:
    check_same_shape(z_t, v, "z_t and v")
    a, s = _coefficients(schedule, t)
    return a * z_t - s * v


def predict_eps(z_t: Volume, v: Volume, t: int, schedule: NoiseSchedule) -> Volume:
    check_same_shape(z_t, v, "z_t and v")
    a, s = _coefficients(schedule, t)
    return s * z_t + a * v


def min_snr_weight(t: int, schedule: NoiseSchedule, gamma: float) -> float:
    """min(SNR_t, gamma) / (SNR_t + 1), strictly inside (0, 1)."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    snr = float(schedule.snr[schedule.check_t(t)])
    return min(snr, gamma) / (snr + 1.0)


def diffusion_loss(v_hat: Volume, v: Volume, t: int, schedule: NoiseSchedule, gamma: float) -> float:
    """w_t * mean((v_hat - v)^2)."""
    return diffusion_loss_and_grad(v_hat, v, t, schedule, gamma)[0]


def diffusion_loss_and_grad(
    v_hat: Volume, v: Volume, t: int, schedule: NoiseSchedule, gamma: float
) -> tuple[float, Volume]:
    """Loss and its gradient with respect to v_hat."""
    check_same_shape(v_hat, v, "prediction and target")
    w = min_snr_weight(t, schedule, gamma)
    diff = v_hat - v
    return w * float((diff * diff).mean()), (2.0 * w / diff.size) * diff
