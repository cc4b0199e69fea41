"""Counter-based 64-bit random generator (splitmix64).

Generator: the i-th output of a stream with seed s is

    mix64((s + (i+1) * GAMMA) mod 2^64)

where GAMMA = 0x9E3779B97F4A7C15 and mix64 is the splitmix64 finalizer
(Steele, Lea & Flood). Instance stream k of a dataset with master seed m is
seeded with  mix64((m ^ GAMMA) + k * GAMMA),  so any stream can be opened
directly from (m, k) without touching the others. Every constant is fixed
here; a generator with the same constants reproduces the byte-exact
sequences in any language.

Doubles in [0, 1) take the top 53 bits: (u64 >> 11) * 2^-53.
"""

from __future__ import annotations

GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def stream_seed(master_seed: int, index: int) -> int:
    """Seed of counter stream `index` derived from a 64-bit master seed."""
    return mix64(((master_seed ^ GAMMA) + index * GAMMA) & _MASK)


class CounterRng:
    """Deterministic stream of 64-bit words from a splitmix64 counter."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & _MASK
        return mix64(self._state)

    def uniform01(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.uniform01()

    def coin(self) -> bool:
        return self.uniform01() < 0.5

    def below(self, bound: int) -> int:
        """Integer in [0, bound) by modulo reduction (bound << 2^64)."""
        return self.next_u64() % bound

    def shuffle_indices(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n)."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx


def instance_rng(master_seed: int, index: int) -> CounterRng:
    """RNG for dataset instance stream `index`."""
    return CounterRng(stream_seed(master_seed, index))
