"""Minimal space descriptors used when gymnasium is not installed.

They mirror the pieces of the Gymnasium space API the bridge and its
checker need: shape/dtype metadata, `contains`, and seeded `sample`.
"""

from __future__ import annotations

import numpy as np


class Discrete:
    def __init__(self, n: int) -> None:
        self.n = int(n)
        self.shape = ()
        self.dtype = np.int64
        self._rng = np.random.default_rng(0)

    def seed(self, seed: int | None = None) -> None:
        self._rng = np.random.default_rng(seed)

    def contains(self, x) -> bool:
        try:
            value = int(x)
        except (TypeError, ValueError):
            return False
        return 0 <= value < self.n

    def sample(self):
        return int(self._rng.integers(0, self.n))

    def __repr__(self) -> str:
        return f"Discrete({self.n})"


class Box:
    def __init__(self, low, high, shape, dtype=np.float64) -> None:
        self.shape = tuple(shape)
        self.dtype = np.dtype(dtype)
        self.low = np.broadcast_to(np.asarray(low, dtype=self.dtype), self.shape).copy()
        self.high = np.broadcast_to(np.asarray(high, dtype=self.dtype), self.shape).copy()
        self._rng = np.random.default_rng(0)

    def seed(self, seed: int | None = None) -> None:
        self._rng = np.random.default_rng(seed)

    def contains(self, x) -> bool:
        arr = np.asarray(x)
        return (
            arr.shape == self.shape
            and bool(np.all(arr >= self.low))
            and bool(np.all(arr <= self.high))
        )

    def sample(self):
        high = np.where(np.isinf(self.high), self.low + 1.0, self.high)
        return self._rng.uniform(self.low, high).astype(self.dtype)

    def __repr__(self) -> str:
        return f"Box(shape={self.shape}, dtype={self.dtype})"
