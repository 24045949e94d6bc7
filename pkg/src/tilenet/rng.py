"""Seedable, portable pseudo-random generator (SplitMix64).

Dataset reproducibility is part of the file-format contract, so the
generator must be re-implementable from its documented definition alone
rather than pinned to a library version.  SplitMix64 fits in a dozen
lines and passes BigCrush; it is more than enough for backgrounds and
placement choices.

Stream definition
-----------------
With 64-bit wrapping arithmetic and ``GOLDEN = 0x9E3779B97F4A7C15``:

* draw ``i`` (counting from 1) of stream ``seed`` is
  ``mix64(seed + i * GOLDEN)``, where ``mix64`` is the SplitMix64
  finalizer (xor-shift / multiply rounds below);
* ``random()`` maps a draw to [0, 1) as ``(u64 >> 11) * 2**-53``;
* ``randbelow(n)`` takes the top ``(n-1).bit_length()`` bits of a draw
  and rejects values >= n (unbiased);
* derived stream seeds fold integer keys:
  ``s = mix64((s ^ key) + GOLDEN)`` for each key in order.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent child seed from a parent seed and integer keys."""
    s = seed & MASK64
    for k in keys:
        s = mix64((s ^ (k & MASK64)) + GOLDEN)
    return s


class SplitMix64:
    """Counter-based SplitMix64 stream.

    The counter form (state after n draws is ``seed + n*GOLDEN``) lets
    ``random_array`` produce draws vectorized with numpy while staying
    bit-identical to the scalar path.
    """

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.count = 0

    def next_u64(self) -> int:
        self.count += 1
        return mix64((self.seed + self.count * GOLDEN) & MASK64)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via top-bits rejection (unbiased)."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        bits = (n - 1).bit_length()
        while True:
            r = self.next_u64() >> (64 - bits) if bits else 0
            if r < n:
                return r

    def random_array(self, size: int) -> np.ndarray:
        """Vectorized equivalent of ``size`` consecutive random() calls."""
        idx = np.arange(self.count + 1, self.count + size + 1, dtype=np.uint64)
        self.count += size
        z = (np.uint64(self.seed) + idx * np.uint64(GOLDEN))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
        z = z ^ (z >> np.uint64(31))
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def spawn(self, *keys: int) -> "SplitMix64":
        """Child stream independent of this one, keyed by integers."""
        return SplitMix64(derive_seed(self.seed, *keys))
