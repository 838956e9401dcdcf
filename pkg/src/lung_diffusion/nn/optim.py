"""
AdamW with decoupled weight decay.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from .params import ParamSet


@dataclass(frozen=True)
class AdamWConfig:
    """AdamW hyperparameters."""
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


def check_grads(params: ParamSet) -> None:
    """
    Reject a parameter set whose gradient buffers hold NaN or Inf.

    Raises:
        NumericalError: Naming the first offending parameter
    """
    for name, grad in params.grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient for parameter {name}", term=name)


def adamw_step(
    params: ParamSet,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """
    One AdamW update with bias correction; gradient buffers are zeroed after.

    Args:
        params: Parameters with populated gradients
        lr: Learning rate
        beta1: First-moment decay
        beta2: Second-moment decay
        eps: Denominator stabilizer
        weight_decay: Decoupled decay coefficient

    Raises:
        NumericalError: If any gradient is non-finite; parameters are left untouched

    Example:
        adamw_step(params, lr=1e-4)
    """
    check_grads(params)
    params.step += 1
    bias1 = 1.0 - beta1 ** params.step
    bias2 = 1.0 - beta2 ** params.step
    decay = 1.0 - lr * weight_decay
    for name, value in params.values.items():
        grad = params.grads[name]
        m = params.m[name]
        v = params.v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        value *= decay
        value -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)
    params.zero_grad()


def apply_adamw(params: ParamSet, config: AdamWConfig) -> None:
    """adamw_step with hyperparameters taken from an AdamWConfig."""
    adamw_step(params, config.lr, config.beta1, config.beta2, config.eps, config.weight_decay)
