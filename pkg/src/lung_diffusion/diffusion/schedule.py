"""
Linear beta schedule and its derived tables.

Tables are indexed by timestep t = 1..T; index 0 holds the t = 0 values
(beta 0, alpha_bar 1) so alpha_bar[t - 1] is always defined.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..models.config import DiffusionConfig


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Precomputed schedule tables.

    Attributes:
        num_timesteps: T
        betas: beta_t
        alphas: 1 - beta_t
        alpha_bars: cumulative product of alphas
        sqrt_alpha_bars: sqrt(alpha_bar_t)
        sqrt_one_minus_alpha_bars: sqrt(1 - alpha_bar_t)
        snr: alpha_bar_t / (1 - alpha_bar_t); infinite at t = 0
    """

    num_timesteps: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    sqrt_alpha_bars: np.ndarray
    sqrt_one_minus_alpha_bars: np.ndarray
    snr: np.ndarray

    def check_t(self, t: int) -> int:
        if not 1 <= t <= self.num_timesteps:
            raise ValueError(f"timestep {t} outside 1..{self.num_timesteps}")
        return int(t)

    def posterior_coefficients(self, t: int) -> tuple[float, float, float]:
        """
        (x0 coefficient, z_t coefficient, variance) of q(z_{t-1} | z_t, x0).

            coef_x0 = sqrt(alpha_bar_{t-1}) * beta_t / (1 - alpha_bar_t)
            coef_zt = sqrt(alpha_t) * (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
            var     = beta_t * (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
        """
        t = self.check_t(t)
        ab_t = self.alpha_bars[t]
        ab_prev = self.alpha_bars[t - 1]
        beta = self.betas[t]
        denom = 1.0 - ab_t
        coef_x0 = np.sqrt(ab_prev) * beta / denom
        coef_zt = np.sqrt(self.alphas[t]) * (1.0 - ab_prev) / denom
        return float(coef_x0), float(coef_zt), float(beta * (1.0 - ab_prev) / denom)


def linear_schedule(num_timesteps: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """
    beta_t = beta_start + (t - 1) / (T - 1) * (beta_end - beta_start).

    Raises:
        ConfigError: Unless 0 < beta_start < beta_end < 1 and T >= 2

    Example:
        schedule = linear_schedule(1000, 1e-4, 0.02)
        schedule.betas[1]  # 1e-4
    """
    if num_timesteps < 2:
        raise ConfigError(f"schedule needs at least 2 timesteps, got {num_timesteps}")
    if not 0.0 < beta_start < beta_end < 1.0:
        raise ConfigError(f"need 0 < beta_start < beta_end < 1, got {beta_start}, {beta_end}")
    t = np.arange(1, num_timesteps + 1, dtype=np.float64)
    betas = np.concatenate([[0.0], beta_start + (t - 1.0) / (num_timesteps - 1) * (beta_end - beta_start)])
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    one_minus = 1.0 - alpha_bars
    with np.errstate(divide="ignore"):
        snr = alpha_bars / one_minus
    for table in (betas, alphas, alpha_bars, snr):
        table.setflags(write=False)
    return NoiseSchedule(
        num_timesteps=num_timesteps,
        betas=betas,
        alphas=alphas,
        alpha_bars=alpha_bars,
        sqrt_alpha_bars=np.sqrt(alpha_bars),
        sqrt_one_minus_alpha_bars=np.sqrt(one_minus),
        snr=snr,
    )


def schedule_from_config(config: DiffusionConfig) -> NoiseSchedule:
    return linear_schedule(config.num_timesteps, config.beta_start, config.beta_end)
