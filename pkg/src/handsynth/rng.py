"""Deterministic, platform-independent random number generation.

Reproducibility across machines and Python/numpy versions is a hard
requirement for the generator, so nothing here delegates to library RNGs.
Two documented primitives cover every random draw in the package:

* ``fnv1a64`` — the 64-bit FNV-1a digest, used to derive per-recording
  seeds from string keys;
* ``SplitMix64`` — a counter-based stream: output ``i`` is the splitmix64
  finalizer applied to ``seed + i * GOLDEN``.  Draw ``k`` never depends on
  draws ``0..k-1``, which is what makes "change one sampled field, keep
  the rest bit-identical" possible in the variation module.

Test vectors for both primitives are pinned in tests/test_variation.py.
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

_GOLDEN = 0x9E3779B97F4A7C15


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


def splitmix64(x: int) -> int:
    """The splitmix64 finalizer: one well-mixed 64-bit output per input."""
    x = (x + _GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Counter-based uniform stream over a fixed 64-bit seed."""

    def __init__(self, seed: int, counter: int = 0):
        self.seed = seed & MASK64
        self.counter = counter

    def next_u64(self) -> int:
        out = splitmix64((self.seed + self.counter * _GOLDEN) & MASK64)
        self.counter += 1
        return out

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform draw in [lo, hi) with 53-bit resolution."""
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + (hi - lo) * u

    def uniforms(self, n: int, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        return [self.uniform(lo, hi) for _ in range(n)]
