"""Deterministic random number generation.

Everything stochastic in this package draws from a splitmix64 stream. The
core is pure 64-bit integer arithmetic, so a given seed produces the same
stream on every platform and Python version. Independent consumers derive
child seeds from (parent seed, label...) so no two of them ever share a
stream, and adding a new consumer never shifts the draws of an old one.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *labels: int | str) -> int:
    """Fold labels (ints or strings) into a parent seed, giving a child seed."""
    h = seed & _MASK
    for label in labels:
        if isinstance(label, int):
            data = (label & _MASK).to_bytes(8, "little")
        else:
            data = str(label).encode("utf-8")
        h = _mix((h + _GOLDEN) & _MASK) ^ len(data)
        for i in range(0, len(data), 8):
            chunk = int.from_bytes(data[i : i + 8], "little")
            h = _mix(((h ^ chunk) + _GOLDEN) & _MASK)
    return h & _MASK


class SplitMix64:
    """Seeded splitmix64 generator with the handful of draws we need."""

    def __init__(self, seed: int):
        self._state = seed & _MASK
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def uniform(self) -> float:
        """Uniform double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        """Standard normal via Box-Muller; the paired draw is cached."""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1], keeps the log finite
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        t = 2.0 * math.pi * u2
        self._spare_normal = r * math.sin(t)
        return r * math.cos(t)

    def normal_array(self, shape: int | tuple[int, ...]) -> np.ndarray:
        out = np.empty(shape, dtype=np.float64)
        flat = out.reshape(-1)
        for i in range(flat.size):
            flat[i] = self.normal()
        return out

    def randint(self, n: int) -> int:
        """Integer in [0, n). Modulo bias is negligible at the sizes used here."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        perm = list(range(n))
        self.shuffle(perm)
        return perm

    def sample_distinct(self, n: int, k: int) -> list[int]:
        """k distinct integers from [0, n), in draw order, by rejection."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        seen: set[int] = set()
        out: list[int] = []
        while len(out) < k:
            v = self.randint(n)
            if v not in seen:
                seen.add(v)
                out.append(v)
        return out
