"""Seedable random number generation, implemented in-repo.

A splitmix64 expander turns a 64-bit seed into xoshiro256** state; the
xoshiro stream then drives every random decision in the project (sampling,
shuffles, weight init, sensor noise). All integer arithmetic is done modulo
2**64 so the streams are bit-identical across platforms.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, output)."""
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def mix(*values: int) -> int:
    """Collapse any number of integers into one well-scrambled 64-bit seed.

    Used to derive independent child streams from (seed, index) pairs so
    that per-item work is order-independent.
    """
    acc = 0x243F6A8885A308D3  # arbitrary non-zero starting constant
    for v in values:
        _, acc = _splitmix64((acc ^ (v & _MASK)) & _MASK)
    return acc


class Rng:
    """xoshiro256** stream seeded from a single 64-bit value via splitmix64."""

    __slots__ = ("seed", "_s")

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        s = self.seed
        state = []
        for _ in range(4):
            s, z = _splitmix64(s)
            state.append(z)
        if not any(state):  # the all-zero state is a fixed point of xoshiro
            state[0] = _GOLDEN
        self._s = state

    def spawn(self, *keys: int) -> "Rng":
        """Child generator with an independent stream derived from keys."""
        return Rng(mix(self.seed, *keys))

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        r = (s1 * 5) & _MASK
        r = (((r << 7) | (r >> 57)) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = [s0, s1, s2, s3]
        return r

    def random(self) -> float:
        """Uniform double in [0, 1), 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        limit = ((1 << 64) // n) * n
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def normal(self) -> float:
        """One standard-normal draw (Box-Muller; consumes two uniforms)."""
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # in (0, 1]
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def uniforms(self, n: int) -> np.ndarray:
        """n uniform doubles in [0, 1) as a float64 array."""
        out = np.empty(n, dtype=np.float64)
        nxt = self.next_u64
        for i in range(n):
            out[i] = (nxt() >> 11) * 2.0**-53
        return out

    def normals(self, n: int) -> np.ndarray:
        """n standard-normal draws (Box-Muller pairs over a bulk fill)."""
        m = (n + 1) // 2
        u = np.empty(2 * m, dtype=np.float64)
        nxt = self.next_u64
        for i in range(m):
            u[2 * i] = ((nxt() >> 11) + 1) * 2.0**-53
            u[2 * i + 1] = (nxt() >> 11) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        phi = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * m, dtype=np.float64)
        z[0::2] = r * np.cos(phi)
        z[1::2] = r * np.sin(phi)
        return z[:n]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        items = list(range(n))
        self.shuffle(items)
        return items
