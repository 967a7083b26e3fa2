"""Deterministic 64-bit RNG with a tiny, portable core.

The generator walks a counter by a fixed odd constant and scrambles each
state with two xor-multiply rounds, so the k-th draw depends only on
``seed + k * GOLDEN (mod 2**64)``. That makes streams reproducible across
languages and lets :meth:`SplitMix64.unit_array` vectorize the whole batch.
"""

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z):
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential generator over a 64-bit counter state."""

    def __init__(self, seed):
        self._state = seed & _MASK

    def next_u64(self):
        """Return the next raw 64-bit draw."""
        self._state = (self._state + GOLDEN) & _MASK
        return _mix(self._state)

    def next_unit(self):
        """Return the next draw mapped into the half-open interval (0, 1]."""
        return ((self.next_u64() >> 11) + 1) * 2.0 ** -53

    def unit_array(self, count):
        """Return ``count`` unit draws as float64, advancing the stream."""
        start = self._state
        self._state = (self._state + count * GOLDEN) & _MASK
        with np.errstate(over="ignore"):
            k = np.arange(1, count + 1, dtype=np.uint64)
            z = np.uint64(start) + k * np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        return ((z >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
