"""Portable seeded random numbers for the simulator.

xorshift64* (Vigna, 2016) with the state initialised by one splitmix64 step
from the user seed. Uniform doubles take the top 53 bits; normal deviates use
the Box-Muller transform, consumed in pairs. Given the same seed the stream is
identical on every platform, so fixtures can be regenerated bit for bit.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int):
        state = splitmix64(seed & _MASK)
        self._s = state or 0x9E3779B97F4A7C15
        self._spare: float | None = None

    def next_u64(self) -> int:
        s = self._s
        s ^= s >> 12
        s ^= (s << 25) & _MASK
        s ^= s >> 27
        self._s = s
        return (s * 0x2545F4914F6CDD1D) & _MASK

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform on [lo, hi)."""
        return lo + (hi - lo) * ((self.next_u64() >> 11) * (1.0 / (1 << 53)))

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = 1.0 - self.uniform()  # (0, 1]
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def angle(self) -> float:
        return self.uniform(0.0, 2.0 * math.pi)
