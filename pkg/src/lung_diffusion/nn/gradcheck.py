"""
Finite-difference gradient checker.

Compares the analytic gradients of a differentiable fragment against
central differences with step h = 1e-4 * (1 + |theta|).
"""

from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol

import numpy as np

from ..core import Rng
from .params import ParamSet

DEFAULT_TOLERANCE = 1e-4
RELATIVE_FLOOR = 1e-3
STEP_SCALE = 1e-4


class Differentiable(Protocol):
    """A model fragment with a scalar loss head attached."""

    params: ParamSet

    def loss(self, inputs: Mapping[str, np.ndarray]) -> float:
        ...

    def loss_and_grads(self, inputs: Mapping[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        """Return (loss, input gradients); parameter gradients go to params.grads."""
        ...


@dataclass
class TensorCheck:
    """Worst relative error over the sampled entries of one tensor."""
    name: str
    max_rel_error: float
    entries: int


@dataclass
class GradCheckReport:
    """Per-tensor results for one fragment."""
    fragment: str
    tolerance: float
    checks: list[TensorCheck] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((c.max_rel_error for c in self.checks), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    @property
    def failures(self) -> list[TensorCheck]:
        return [c for c in self.checks if c.max_rel_error >= self.tolerance]


def relative_error(analytic: float, numeric: float, floor: float = RELATIVE_FLOOR) -> float:
    """|a - n| / max(|a|, |n|, floor)."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _sample_indices(size: int, max_entries: Optional[int], rng: Rng) -> np.ndarray:
    if max_entries is None or size <= max_entries:
        return np.arange(size)
    return np.sort(rng.permutation(size)[:max_entries])


def grad_check(
    fragment: Differentiable,
    inputs: Mapping[str, np.ndarray],
    tolerance: float = DEFAULT_TOLERANCE,
    max_entries: Optional[int] = 16,
    rng: Optional[Rng] = None,
    name: str = "fragment",
) -> GradCheckReport:
    """
    Check analytic parameter and input gradients against central differences.

    Args:
        fragment: Differentiable fragment with a scalar loss head
        inputs: Named input arrays (perturbed in place, then restored)
        tolerance: Pass threshold on the relative error
        max_entries: Entries sampled per tensor (None checks every entry)
        rng: Stream used to sample entries
        name: Label for the report

    Returns:
        GradCheckReport: Per-tensor worst relative errors; failures are
            reported, never raised
    """
    rng = rng or Rng(0).spawn("gradcheck")
    params = fragment.params
    params.zero_grad()
    _, input_grads = fragment.loss_and_grads(inputs)
    analytic = {f"param:{n}": params.grads[n].copy() for n in params}
    analytic.update({f"input:{n}": g.copy() for n, g in input_grads.items()})
    params.zero_grad()

    targets = {f"param:{n}": params.values[n] for n in params}
    targets.update({f"input:{n}": inputs[n] for n in input_grads})

    report = GradCheckReport(fragment=name, tolerance=tolerance)
    for label, array in targets.items():
        flat = array.reshape(-1)
        if not np.shares_memory(flat, array):
            raise ValueError(f"{label} must be C-contiguous to be perturbed in place")
        grad = analytic[label].reshape(-1)
        worst = 0.0
        indices = _sample_indices(flat.size, max_entries, rng.spawn(label))
        for i in indices:
            original = flat[i]
            h = STEP_SCALE * (1.0 + abs(original))
            flat[i] = original + h
            loss_plus = fragment.loss(inputs)
            flat[i] = original - h
            loss_minus = fragment.loss(inputs)
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            worst = max(worst, relative_error(float(grad[i]), numeric))
        report.checks.append(TensorCheck(name=label, max_rel_error=worst, entries=len(indices)))
    return report
