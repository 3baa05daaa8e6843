"""Counter-derived xoshiro256** streams, one per trial.

Stream derivation (documented so results are citable)::

    key_i   = mix64(mix64(master_seed) + (i + 1) * GOLDEN)
    word_k  = mix64(key_i + (k + 1) * GOLDEN),   k = 0..3

where ``mix64`` is the splitmix64 finaliser and all arithmetic is modulo
2**64.  ``random()`` returns ``(next >> 11) * 2**-53``.  The numba kernels in
:mod:`driftkit.kernels` use the same arithmetic, so both paths agree bit
for bit.
"""
from __future__ import annotations

import numpy as np

GENERATOR_ID = "xoshiro256**/splitmix64-stream-v1"

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_words(master_seed: int, trial: int) -> tuple[int, int, int, int]:
    key = mix64((mix64(master_seed & MASK64) + (trial + 1) * GOLDEN) & MASK64)
    words = tuple(mix64((key + (k + 1) * GOLDEN) & MASK64) for k in range(4))
    if not any(words):
        words = (GOLDEN, 0, 0, 0)
    return words


def stream_states(master_seed: int, first: int, count: int) -> np.ndarray:
    """Initial states of trials ``first .. first+count-1`` as uint64 rows."""
    out = np.empty((count, 4), dtype=np.uint64)
    for j in range(count):
        out[j] = stream_words(master_seed, first + j)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """Pure-Python xoshiro256** used as the reference implementation."""

    __slots__ = ("s",)

    def __init__(self, words):
        self.s = [int(w) & MASK64 for w in words]

    @classmethod
    def for_trial(cls, master_seed: int, trial: int) -> "Xoshiro256":
        return cls(stream_words(master_seed, trial))

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * INV_2_53

    def below(self, n: int) -> int:
        """Integer in ``[0, n)``; ``floor(random() * n)``."""
        return int(self.random() * n)
