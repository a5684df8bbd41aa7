"""Counter-based random numbers.

Every draw is a pure function of ``(key, counter)``: the SplitMix64 finaliser
is applied to the counter, xor-ed with the stream key and mixed again.  A
stream never depends on how work is split between workers, which is what
makes runs reproducible across thread counts.  The compiled kernel uses the
identical construction, so both backends see the same bits.
"""
from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_G = np.uint64(GOLDEN)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _mix64_int(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _tag_int(tag) -> int:
    if isinstance(tag, str):
        return zlib.crc32(tag.encode()) | (1 << 40)
    return int(tag) & MASK64


def derive_key(seed: int, *tags) -> int:
    """Stream key from a seed and a path of integer or string tags."""
    z = _mix64_int(_tag_int(seed) * GOLDEN + GOLDEN)
    for tag in tags:
        z = _mix64_int(z ^ _mix64_int(_tag_int(tag) * GOLDEN + GOLDEN))
    return z


def random_bits(keys, counters) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(keys ^ mix64(counters * _G + _G))


def uniforms(keys, counters) -> np.ndarray:
    """Uniform doubles on ``[0, 1)``."""
    return (random_bits(keys, counters) >> np.uint64(11)).astype(np.float64) * _INV53


def normals(keys, counters) -> np.ndarray:
    """Standard normals via Box-Muller, consuming counters ``c`` and ``c + 1``."""
    counters = np.asarray(counters, dtype=np.uint64)
    u1 = ((random_bits(keys, counters) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53
    u2 = (random_bits(keys, counters + np.uint64(1)) >> np.uint64(11)).astype(np.float64) * _INV53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


class RngStream:
    """A sequential view of one counter-based stream."""

    def __init__(self, key: int, counter: int = 0):
        self.key = int(key) & MASK64
        self.counter = int(counter)

    @classmethod
    def from_seed(cls, seed: int, *tags) -> "RngStream":
        return cls(derive_key(seed, *tags))

    def _take(self, n: int, width: int = 1) -> np.ndarray:
        c = self.counter + width * np.arange(n, dtype=np.uint64)
        self.counter += width * n
        return c

    def uniform(self, size: int | None = None):
        n = 1 if size is None else int(size)
        out = uniforms(np.uint64(self.key), self._take(n))
        return float(out[0]) if size is None else out

    def normal(self, size: int | None = None):
        n = 1 if size is None else int(size)
        out = normals(np.uint64(self.key), self._take(n, 2))
        return float(out[0]) if size is None else out

    def generator(self) -> np.random.Generator:
        """A numpy Generator keyed by this stream (for gamma/normal prior draws)."""
        key = derive_key(self.key, self.counter)
        self.counter += 1
        return np.random.Generator(np.random.Philox(key=key))


def derive_keys(seed: int, *tags, count: int) -> np.ndarray:
    """``[derive_key(seed, *tags, i) for i in range(count)]`` as a uint64 array."""
    z = np.uint64(derive_key(seed, *tags))
    idx = np.arange(count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(z ^ mix64(idx * _G + _G))
