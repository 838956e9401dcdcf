"""
Named parameter storage with gradient and AdamW moment buffers.
"""

from typing import Iterator

import numpy as np

from ..errors import ShapeError


class ParamSet:
    """
    Named parameters, one gradient buffer per parameter, AdamW moments.

    A frozen ParamSet (feature extractors) ignores gradient accumulation.

    Attributes:
        values: Parameter arrays by name
        grads: Gradient buffers, same shapes as values
        m: First-moment buffers
        v: Second-moment buffers
        step: Number of optimizer steps taken
        frozen: Whether gradient accumulation is disabled

    Example:
        params = ParamSet()
        params.add("head.weight", np.zeros((4, 8)))
        params.accumulate("head.weight", np.ones((4, 8)))
    """

    def __init__(self, frozen: bool = False):
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0
        self.frozen = frozen

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def add(self, name: str, value: np.ndarray) -> str:
        """Register a parameter with zeroed gradient and moment buffers."""
        if name in self.values:
            raise ValueError(f"duplicate parameter name: {name}")
        value = np.array(value, dtype=np.float64)
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        self.m[name] = np.zeros_like(value)
        self.v[name] = np.zeros_like(value)
        return name

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        """Add a gradient contribution into the named buffer."""
        if self.frozen:
            return
        buffer = self.grads[name]
        if grad.shape != buffer.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, expected {buffer.shape}")
        buffer += grad

    def zero_grad(self) -> None:
        for buffer in self.grads.values():
            buffer.fill(0.0)

    def num_parameters(self) -> int:
        return int(sum(v.size for v in self.values.values()))

    def round_to_storage(self) -> None:
        """Round values and moments to float32 precision, as stored in checkpoints."""
        for store in (self.values, self.m, self.v):
            for name, arr in store.items():
                arr[...] = arr.astype(np.float32).astype(np.float64)

    def copy_values(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.values.items()}

    def load(
        self,
        values: dict[str, np.ndarray],
        m: dict[str, np.ndarray] | None = None,
        v: dict[str, np.ndarray] | None = None,
        step: int = 0,
    ) -> None:
        """
        Overwrite parameters (and optionally optimizer state) in place.

        Raises:
            ShapeError: If names or shapes differ from the registered set
        """
        missing = set(self.values) - set(values)
        unexpected = set(values) - set(self.values)
        if missing or unexpected:
            raise ShapeError(
                f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        for name, arr in values.items():
            if arr.shape != self.values[name].shape:
                raise ShapeError(
                    f"parameter {name} has shape {arr.shape}, expected {self.values[name].shape}"
                )
            self.values[name][...] = arr
            if m is not None and name in m:
                self.m[name][...] = m[name]
            if v is not None and name in v:
                self.v[name][...] = v[name]
        self.step = int(step)
