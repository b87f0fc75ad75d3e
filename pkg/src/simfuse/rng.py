"""Portable seeded pseudo-random generator for reproducible fixtures.

The generator is xoshiro256** (Blackman & Vigna), seeded by expanding a
single 64-bit seed through splitmix64. Both algorithms are fully specified
by integer arithmetic on 64-bit words, so any language can reproduce the
stream bit-for-bit:

  splitmix64 step (used four times to fill the xoshiro state):
      state += 0x9E3779B97F4A7C15
      z = state
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      return z ^ (z >> 31)

  xoshiro256** step (s0..s3 is the 256-bit state):
      result = rotl64(s1 * 5, 7) * 9
      t = s1 << 17
      s2 ^= s0;  s3 ^= s1;  s1 ^= s2;  s0 ^= s3
      s2 ^= t;   s3 = rotl64(s3, 45)

Derived values are likewise pinned down:

  * ``random()`` is ``(next_u64() >> 11) * 2**-53`` (53-bit mantissa, [0, 1)).
  * ``gauss()`` is the trigonometric Box-Muller transform using one uniform
    in (0, 1] and one in [0, 1); the second variate of each pair is cached
    and returned by the following call.

All floating-point steps are IEEE-754 double precision, so streams are
reproducible across platforms.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * math.pi


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """Seedable 64-bit generator with a documented, portable stream."""

    def __init__(self, seed: int):
        seed &= _MASK64
        state = seed
        s = []
        for _ in range(4):
            word, state = _splitmix64(state)
            s.append(word)
        self._s = s
        self._gauss_spare: float | None = None

    def next_u64(self) -> int:
        """Next 64-bit word of the raw stream."""
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 significant bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def gauss(self) -> float:
        """Standard normal variate via Box-Muller on the portable stream."""
        if self._gauss_spare is not None:
            z = self._gauss_spare
            self._gauss_spare = None
            return z
        # u1 in (0, 1] so the log is finite; u2 in [0, 1).
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        self._gauss_spare = r * math.sin(_TWO_PI * u2)
        return r * math.cos(_TWO_PI * u2)

    def gauss_vector(self, n: int) -> list[float]:
        return [self.gauss() for _ in range(n)]

    def unit_vector(self, n: int) -> list[float]:
        """Uniform point on the unit sphere in R^n (normalized Gaussians)."""
        while True:
            v = self.gauss_vector(n)
            norm = math.sqrt(math.fsum(x * x for x in v))
            if norm > 1e-12:
                return [x / norm for x in v]
