"""Seedable, portable random number generation.

The stream is counter-based splitmix64: draw k of a stream with seed s is
``mix64((s + k * GOLDEN) mod 2**64)`` where GOLDEN is the 64-bit
golden-ratio increment 0x9E3779B97F4A7C15 and ``mix64`` is the standard
two-round xorshift-multiply finalizer.  Uniform doubles take the top 53
bits of an output word.  Gaussian draws use the Box-Muller cosine branch
only, so every Gaussian consumes exactly two uniforms and a stream does
not depend on how requests are batched.  Worlds generated from the same
seed are therefore identical across platforms and chunkings.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1
_INV53 = 2.0 ** -53


def mix64(z: int) -> int:
    """Finalize one 64-bit state word into an output word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Deterministic splitmix64 stream with vectorized output."""

    def __init__(self, seed: int):
        if not isinstance(seed, int) or not 0 <= seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self._seed = seed
        self._count = 0

    @property
    def count(self) -> int:
        """Number of raw 64-bit words drawn so far."""
        return self._count

    def _raw(self, n: int) -> np.ndarray:
        """Next n output words as uint64."""
        ks = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            z = np.uint64(self._seed) + ks * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        return z

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1)."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV53

    def normals(self, n: int) -> np.ndarray:
        """n standard Gaussian draws.

        Box-Muller with the cosine branch: z = sqrt(-2 ln u1) cos(2 pi u2),
        u1 on (0, 1] so the log stays finite.
        """
        w = (self._raw(2 * n) >> np.uint64(11)).astype(np.float64)
        u1 = (w[0::2] + 1.0) * _INV53
        u2 = w[1::2] * _INV53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def integer(self, upper: int) -> int:
        """One integer in [0, upper); modulo bias is ~upper / 2**64."""
        if upper <= 0:
            raise ValueError("upper must be positive")
        # scalar path, same stream as _raw but without array overhead
        self._count += 1
        return mix64(self._seed + self._count * _GOLDEN) % upper

    def choice(self, seq):
        if len(seq) == 0:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.integer(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.integer(i + 1)
            items[i], items[j] = items[j], items[i]
