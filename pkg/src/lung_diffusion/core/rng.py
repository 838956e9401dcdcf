"""
Seeded random number streams.

Every stream is a numpy Generator over the counter-based Philox bit
generator, keyed by a 64-bit seed plus a path of named sub-streams. The
same seed and call sequence produce the same numbers on every platform.
"""

import hashlib
from typing import Sequence, Union

import numpy as np

from ..errors import ConfigError, ShapeError

StreamKey = Union[str, int]

MAX_SEED = 2**64 - 1


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, int):
        if key < 0:
            raise ConfigError(f"stream index must be non-negative, got {key}")
        return key
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Rng:
    """
    Deterministic random stream.

    Attributes:
        seed: Root 64-bit seed
        path: Names of the sub-streams leading to this stream

    Example:
        rng = Rng(42)
        train = rng.spawn("train")
        eps = train.normal((4, 8, 8, 8))
    """

    def __init__(self, seed: int, path: Sequence[StreamKey] = ()):
        if not 0 <= int(seed) <= MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self.path = tuple(path)
        sequence = np.random.SeedSequence(self.seed, spawn_key=tuple(_key_to_int(k) for k in self.path))
        self._generator = np.random.Generator(np.random.Philox(sequence))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, path={self.path!r})"

    def spawn(self, key: StreamKey) -> "Rng":
        """Derive an independent child stream; does not advance this stream."""
        return Rng(self.seed, self.path + (key,))

    def for_step(self, step: int) -> "Rng":
        """Stream for one training step; (seed, path, step) fixes it completely."""
        return self.spawn("step").spawn(int(step))

    def normal(self, shape: Sequence[int]) -> np.ndarray:
        """Draw i.i.d. standard normal values of the given shape (float64)."""
        shape = tuple(int(s) for s in shape)
        if any(s < 1 for s in shape):
            raise ShapeError(f"invalid shape for normal draw: {shape}")
        return self._generator.standard_normal(shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        """Draw uniform values in [low, high)."""
        return self._generator.uniform(low, high, size)

    def integers(self, low: int, high: int) -> int:
        """Draw one integer uniformly from the inclusive range [low, high]."""
        return int(self._generator.integers(low, high, endpoint=True))

    def poisson(self, lam: float) -> int:
        """One Poisson draw with mean lam."""
        return int(self._generator.poisson(lam))

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of range(n)."""
        return self._generator.permutation(n)

    def choice_pairs(self, n: int, k: int) -> list[tuple[int, int]]:
        """
        Draw k unordered index pairs (i < j) from range(n).

        Pairs do not repeat until all n(n-1)/2 have been used.

        Raises:
            ValueError: If n < 2 or k < 1
        """
        if n < 2:
            raise ValueError(f"need at least 2 items to form pairs, got {n}")
        if k < 1:
            raise ValueError(f"pair count must be positive, got {k}")
        rows, cols = np.triu_indices(n, k=1)
        order: list[int] = []
        while len(order) < k:
            order.extend(int(i) for i in self._generator.permutation(rows.size))
        return [(int(rows[i]), int(cols[i])) for i in order[:k]]
