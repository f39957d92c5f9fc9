"""Deterministic random number generation.

The generator is a counter-based SplitMix64: draw ``i`` of a stream seeded
with ``s`` is ``mix64(s + (i + 1) * GOLDEN)`` where ``mix64`` is the murmur3
finalizer variant from Steele, Lea and Flood (2014).  The whole stream is a
pure function of ``(seed, counter)``, so identical seeds give identical
streams on every platform and draws can be produced in vectorised blocks.

Floats in [0, 1) take the top 53 bits of a 64-bit word.  Normals use the
Box-Muller transform on consecutive pairs.  Permutations use Fisher-Yates
with modulo-reduced words; the modulo bias is irrelevant at the sizes used
here (n far below 2**32).
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Seeded deterministic stream of uniforms, normals and permutations."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & _MASK)
        self._counter = 0

    def _words(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64(self._seed + idx * _GOLDEN)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray | float:
        shape = () if size is None else tuple(np.atleast_1d(size))
        n = int(np.prod(shape)) if shape else 1
        u = (self._words(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        out = low + (high - low) * u
        if size is None:
            return float(out[0])
        return out.reshape(shape)

    def normal(self, size=None) -> np.ndarray | float:
        shape = () if size is None else tuple(np.atleast_1d(size))
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        u1 = (self._words(m) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        u2 = (self._words(m) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        r = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 keeps the argument in (0, 1]
        ang = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(ang), r * np.sin(ang)])[:n]
        if size is None:
            return float(z[0])
        return z.reshape(shape)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in [low, high)."""
        shape = () if size is None else tuple(np.atleast_1d(size))
        n = int(np.prod(shape)) if shape else 1
        span = np.uint64(high - low)
        vals = (self._words(n) % span).astype(np.int64) + low
        if size is None:
            return int(vals[0])
        return vals.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        out = np.arange(n)
        words = self._words(max(n - 1, 0))
        for i in range(n - 1, 0, -1):
            j = int(words[n - 1 - i] % np.uint64(i + 1))
            out[i], out[j] = out[j], out[i]
        return out

    def child(self, key: int) -> "Rng":
        """Derive an independent stream, e.g. one per sweep case."""
        with np.errstate(over="ignore"):
            s = _mix64(self._seed ^ (np.uint64(key & _MASK) * _MIX2 + _GOLDEN))
        return Rng(int(s))
