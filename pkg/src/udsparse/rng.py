"""Seeded xorshift64* generator used for parameter initialization.

The algorithm is spelled out so the stream can be reproduced in any
language:

  state seeding (splitmix64):
      z = (seed + 0x9E3779B97F4A7C15) mod 2^64
      z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
      z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
      state = z ^ (z >> 31); if state == 0: state = 0x9E3779B97F4A7C15

  next_u64 (xorshift64*):
      state ^= state >> 12
      state ^= (state << 25) mod 2^64
      state ^= state >> 27
      return (state * 0x2545F4914F6CDD1D) mod 2^64

  uniform in [0, 1): next_u64() >> 11, divided by 2^53.

Shuffling is Fisher-Yates with ``j = next_u64() % (i + 1)`` (the modulo
bias is negligible at these ranges).
"""

import numpy as np

_MASK = (1 << 64) - 1
_MULT = 0x2545F4914F6CDD1D


class XorShiftRNG:
    def __init__(self, seed=0):
        z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        self.state = (z ^ (z >> 31)) & _MASK
        if self.state == 0:
            self.state = 0x9E3779B97F4A7C15

    def next_u64(self):
        s = self.state
        s ^= s >> 12
        s = (s ^ (s << 25)) & _MASK
        s ^= s >> 27
        self.state = s
        return (s * _MULT) & _MASK

    def uniform(self, low=0.0, high=1.0):
        u = (self.next_u64() >> 11) / float(1 << 53)
        return low + (high - low) * u

    def uniform_array(self, shape, low=0.0, high=1.0):
        size = int(np.prod(shape)) if shape else 1
        data = np.empty(size, dtype=np.float64)
        for i in range(size):
            data[i] = self.uniform(low, high)
        return data.reshape(shape)

    def randint(self, n):
        """Integer in [0, n)."""
        return self.next_u64() % n

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a list."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            items[i], items[j] = items[j], items[i]

    def split(self):
        """Derive an independent generator from this one's stream."""
        return XorShiftRNG(self.next_u64())
