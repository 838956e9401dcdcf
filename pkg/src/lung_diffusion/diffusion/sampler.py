"""
Ancestral DDPM sampling over all T steps with v-predictions.
"""

import logging
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from ..core import Rng, Volume, check_same_shape
from .objectives import predict_x0
from .schedule import NoiseSchedule

logger = logging.getLogger(__name__)


class VelocityModel(Protocol):
    """Anything that predicts v from (z_t, t) and optional conditioning."""

    conditional: bool

    def embed_context(self, mask_latent: Optional[Volume]) -> Optional[np.ndarray]:
        ...

    def predict(
        self,
        z_t: Volume,
        t: int,
        context: Optional[np.ndarray] = None,
        mask_latent: Optional[Volume] = None,
    ) -> Volume:
        ...


def ddpm_step(
    z_t: Volume,
    v_hat: Volume,
    t: int,
    schedule: NoiseSchedule,
    noise: Optional[Volume] = None,
    clamp_x0: Optional[float] = None,
) -> Volume:
    """
    One reverse step z_t -> z_{t-1} using the posterior mean and variance.

    At t = 1 the predicted x0 is returned and noise is ignored.

    Args:
        z_t: Current latent
        v_hat: Velocity prediction at (z_t, t)
        t: Timestep in 1..T
        schedule: Noise schedule
        noise: Standard normal draw, required for t > 1
        clamp_x0: Clamp the predicted x0 to +-clamp_x0 when set

    Raises:
        ValueError: If t is out of range or noise is missing for t > 1
    """
    t = schedule.check_t(t)
    x0_hat = predict_x0(z_t, v_hat, t, schedule)
    if clamp_x0 is not None:
        x0_hat = np.clip(x0_hat, -clamp_x0, clamp_x0)
    if t == 1:
        return x0_hat
    if noise is None:
        raise ValueError(f"noise is required at t = {t}")
    check_same_shape(z_t, noise, "z_t and noise")
    coef_x0, coef_zt, variance = schedule.posterior_coefficients(t)
    return coef_x0 * x0_hat + coef_zt * z_t + np.sqrt(variance) * noise


def sample(
    model: VelocityModel,
    schedule: NoiseSchedule,
    shape: Sequence[int],
    rng: Rng,
    context: Optional[np.ndarray] = None,
    mask_latent: Optional[Volume] = None,
    clamp_x0: Optional[float] = None,
    on_step: Optional[Callable[[int], None]] = None,
) -> Volume:
    """
    Draw z_T ~ N(0, I) and run T ancestral steps down to t = 1.

    The caller de-standardizes and decodes the returned latent.
    """
    shape = tuple(shape)
    if context is None and mask_latent is not None:
        context = model.embed_context(mask_latent)
    z = rng.normal(shape)
    for t in range(schedule.num_timesteps, 0, -1):
        v_hat = model.predict(z, t, context=context, mask_latent=mask_latent)
        noise = rng.normal(shape) if t > 1 else None
        z = ddpm_step(z, v_hat, t, schedule, noise, clamp_x0)
        if on_step is not None:
            on_step(t)
    return z


def sample_stream(seed: int, index: int) -> Rng:
    """Stream of the index-th sample of a run: seed + index."""
    return Rng(seed + index).spawn("sample")
