"""Fixed 64-bit generator for reproducible campaign builds.

Task batching, trapping/gold placement, and scale-order permutation must
reproduce bit-for-bit from a seed, including across reimplementations in
other languages. Everything here is therefore pinned to one published
algorithm rather than any runtime's default RNG:

* Generator: SplitMix64 (Steele, Lea & Flood 2014). State advances by the
  golden-gamma increment ``0x9E3779B97F4A7C15``; output is the finalizer
  with multipliers ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``.
* Bounded draws: ``next() mod n`` (modulo bias < 2**-50 for any n used
  here, far below what the uniformity checks can resolve).
* Shuffle: Fisher-Yates, descending, ``j = bounded(i + 1)``.

Reimplementing these three rules verbatim reproduces every manifest.
"""

from __future__ import annotations

from typing import MutableSequence

_MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """SplitMix64 stream seeded with an arbitrary 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def bounded(self, n: int) -> int:
        """Uniform draw from [0, n) via modulo reduction."""
        if n <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % n

    def shuffle(self, items: MutableSequence) -> None:
        """In-place Fisher-Yates shuffle, descending index order."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]

    def uniform(self) -> float:
        """Uniform float in (0, 1] from the top 53 bits (log-safe)."""
        return ((self.next_u64() >> 11) + 1) * 2.0 ** -53
