"""Fixed-algorithm random streams for reproducible dataset generation.

Every sample in a synthesis run owns a family of independent streams, one
per lane (case sampling, asset picks, parameter draws, ...).  The stream
algorithms are pinned -- splitmix64 for seeding, xoshiro256** for draws,
high 53 bits for uniform reals -- so a dataset regenerates bit-identically
regardless of host, thread count, or implementation language.
"""

from __future__ import annotations

_MASK64 = 0xFFFFFFFFFFFFFFFF

# splitmix64 constants (Steele, Lea, Flood 2014)
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state, returning (new_state, output)."""
    state = (state + _SM_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SM_MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_MUL2) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def mix64(x: int) -> int:
    """One splitmix64 step applied to x alone (a 64-bit finalizer)."""
    return splitmix64(x & _MASK64)[1]


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Stream:
    """xoshiro256** generator seeded from a single 64-bit value.

    The four state words are filled by consecutive splitmix64 outputs, the
    recommended seeding procedure for the xoshiro family.
    """

    __slots__ = ("_s",)

    def __init__(self, seed: int):
        s = []
        state = seed & _MASK64
        for _ in range(4):
            state, out = splitmix64(state)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) from the high 53 bits of the next draw."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        # floor(u * n) on a 53-bit uniform; bias is negligible for any
        # n this harness draws and the result is language-portable.
        return min(int(self.random() * n), n - 1)

    def randrange(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.randint(hi - lo + 1)

    def choice(self, seq):
        return seq[self.randint(len(seq))]


def derive_stream(master_seed: int, sample_index: int, lane: int) -> Stream:
    """Independent stream for (sample, lane) under one master seed.

    Streams for distinct (index, lane) pairs never share state, so samples
    may be generated on any worker in any order.
    """
    h = mix64(mix64(sample_index & _MASK64) ^ (lane & _MASK64))
    return Stream((master_seed ^ h) & _MASK64)
