"""Counter-based pseudo-random numbers for reproducible parallel simulation.

Draw ``i`` of a stream is a pure function of (key, i): a splitmix64-style
finalizer applied to ``key + (i+1) * GOLDEN``.  Consequences the simulator
relies on:

* substreams keyed on (seed, stream id) are independent and can be consumed
  in any order, in any process, with bit-identical results;
* a block of uniforms equals the concatenation of its sub-blocks, so lazy,
  chunked, and compiled generation paths all see the same sequence;
* any position of a stream can be regenerated in O(1) without replaying.

The compiled simulation kernels implement the same mixer; equality of the
two implementations is pinned by tests.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX_A = np.uint64(0xBF58476D1CE4E5B9)
MIX_B = np.uint64(0x94D049BB133111EB)
INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53
U64_MASK = (1 << 64) - 1


def mix64(key, counters) -> np.ndarray:
    """Vectorized mixer: finalize(key + (c+1)*GOLDEN) over uint64 counters."""
    key = np.uint64(key)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = key + (c + np.uint64(1)) * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * MIX_A
        z = (z ^ (z >> np.uint64(27))) * MIX_B
        return z ^ (z >> np.uint64(31))


def mix64_scalar(key, counter) -> int:
    return int(mix64(key, np.asarray([counter], dtype=np.uint64))[0])


def mix64_keys(keys, counter) -> np.ndarray:
    """The same mixer over an array of keys at one fixed counter."""
    k = np.asarray(keys, dtype=np.uint64)
    c = np.uint64(counter)
    with np.errstate(over="ignore"):
        z = k + (c + np.uint64(1)) * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * MIX_A
        z = (z ^ (z >> np.uint64(27))) * MIX_B
        return z ^ (z >> np.uint64(31))


def uniforms_from_words(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to float64 uniforms in [0, 1) (top 53 bits)."""
    return (words >> np.uint64(11)).astype(np.float64) * INV_2_53


def bit_threshold(p: float) -> int:
    """Integer t with (word >> 11) >= t  <=>  uniform >= p, exactly.

    Both sides are exact because a 53-bit integer times 2**-53 is exact in
    float64; this lets compiled kernels compare words without converting
    to float.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability out of range")
    return int(np.ceil(p * 2.0**53))


class CounterRng:
    """A stateful view over one counter-indexed stream.

    ``random()`` consumes counters sequentially like a conventional
    generator; ``uniforms_at`` reads any window of the stream statelessly.
    """

    __slots__ = ("key", "_ctr")

    def __init__(self, seed: int | None = None, stream: int = 0, _key: int | None = None):
        if _key is not None:
            self.key = int(_key) & U64_MASK
        else:
            if seed is None:
                raise ValueError("seed required")
            k0 = mix64_scalar(np.uint64(int(seed) & U64_MASK), 0)
            self.key = mix64_scalar(k0, int(stream) & U64_MASK)
        self._ctr = 0

    def spawn(self, stream: int) -> "CounterRng":
        """Derive an independent child stream; does not consume state."""
        return CounterRng(_key=mix64_scalar(self.key, int(stream) & U64_MASK))

    def uniforms_at(self, start: int, count: int) -> np.ndarray:
        ctrs = np.arange(start, start + count, dtype=np.uint64)
        return uniforms_from_words(mix64(self.key, ctrs))

    def words_at(self, start: int, count: int) -> np.ndarray:
        ctrs = np.arange(start, start + count, dtype=np.uint64)
        return mix64(self.key, ctrs)

    def random(self, size: int | None = None):
        if size is None:
            u = self.uniforms_at(self._ctr, 1)
            self._ctr += 1
            return float(u[0])
        u = self.uniforms_at(self._ctr, size)
        self._ctr += int(size)
        return u

    def randint_below(self, n: int) -> int:
        """Uniform draw from {0, ..., n-1} (bias below 2**-53 * n)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return min(int(self.random() * n), n - 1)
