"""Deterministic, platform-independent random streams.

The generator is counter based: draw ``i`` of stream ``seed`` is a pure
function of ``(seed, i)``, so streams can be reproduced bit for bit from
the seed alone, on any platform, regardless of how earlier draws were
batched.  The integer kernel is the splitmix64 finalizer applied to
``seed + (i + 1) * GOLDEN`` (all mod 2**64); uniforms take the top 53
bits to the midpoint of the unit interval, so 0 and 1 are never hit;
normals go through the inverse CDF, keeping the u -> z map monotone.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

__all__ = ["PortableRng"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_NEG_53 = 2.0 ** -53


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64 arrays."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class PortableRng:
    """Seeded stream of uniforms and standard normals.

    Successive calls continue the stream: ``uniform(2)`` then
    ``uniform(3)`` returns the same five values as a single
    ``uniform(5)``.  Two instances with the same seed produce identical
    output on every platform.
    """

    __slots__ = ("_seed", "_counter")

    def __init__(self, seed: int) -> None:
        if not isinstance(seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
        self._seed = np.uint64(int(seed) % (1 << 64))
        self._counter = 0

    @property
    def seed(self) -> int:
        return int(self._seed)

    @property
    def counter(self) -> int:
        """Number of draws consumed so far."""
        return self._counter

    def _next_words(self, n: int) -> np.ndarray:
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError(f"draw count must be a non-negative integer, got {n!r}")
        idx = np.arange(self._counter + 1, self._counter + int(n) + 1, dtype=np.uint64)
        self._counter += int(n)
        with np.errstate(over="ignore"):
            return _mix64(self._seed + idx * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """Next ``n`` uniforms on the open interval (0, 1)."""
        words = self._next_words(n)
        # top 53 bits, shifted to bin midpoints: ((w >> 11) + 0.5) * 2^-53
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_NEG_53

    def normal(self, n: int) -> np.ndarray:
        """Next ``n`` standard normals (inverse CDF of :meth:`uniform`)."""
        return ndtri(self.uniform(n))
