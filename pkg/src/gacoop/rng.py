"""Portable seeded PRNG used for every random draw in the library.

The generator is counter-based splitmix64, chosen so that an implementation
in any language can reproduce the exact streams from the documented recipe:

    raw output k (k = 1, 2, ...) of a generator seeded with `seed` is

        mix64((seed + k * 0x9E3779B97F4A7C15) mod 2^64)

    where mix64(z) is the splitmix64 finalizer:

        z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9   (mod 2^64)
        z ^= z >> 27;  z *= 0x94D049BB133111EB   (mod 2^64)
        z ^= z >> 31

Derived quantities:

* uniform double in [0, 1):   (raw >> 11) * 2^-53
* uniform double in (0, 1]:   ((raw >> 11) + 1) * 2^-53
* uniform(a, b):              a + (b - a) * unit
* standard normals:           Box-Muller pairs; draw u1 in (0, 1] then
  u2 in [0, 1) (two consecutive raw outputs, in that order) and emit
  sqrt(-2 ln u1) * cos(2 pi u2) followed by sqrt(-2 ln u1) * sin(2 pi u2).
  A fill of n normals consumes ceil(n/2) pairs and discards the trailing
  sin-value when n is odd; nothing is carried over between calls.

Sub-stream seeds are derived by the same mixing function:

    derive_seed(master, stream) = mix64((master + (stream + 1) * GOLDEN) mod 2^64)

which is exactly raw output (stream + 1) of a generator seeded with
`master`. Master seeds are used only for derivation, never directly as a
stream, so derived streams never overlap.

Integer state transitions are exact in every implementation. Float
derivations (log/cos/sqrt) go through the platform libm, so byte-identical
output is guaranteed per platform build; repeat runs on one machine always
agree bit-for-bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, stream: int) -> int:
    """Seed for an independent sub-stream; see module docstring for the recipe."""
    return mix64((master + ((stream + 1) * GOLDEN)) & MASK64)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2^64, matching the scalar path exactly
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX_A)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


class SeededRng:
    """Counter-based splitmix64 stream (see module docstring for the algorithm)."""

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._counter = 0

    def _raw_block(self, n: int) -> np.ndarray:
        """Next n raw uint64 outputs, advancing the counter."""
        if n < 0:
            raise ValueError("block size must be non-negative")
        ks = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + ks * np.uint64(GOLDEN)
            return _mix64_array(z)

    def next_u64(self) -> int:
        return int(self._raw_block(1)[0])

    def uniform(self, low: float = 0.0, high: float = 1.0, n: int | None = None):
        """Uniform doubles in [low, high); scalar when n is None."""
        m = 1 if n is None else n
        u = (self._raw_block(m) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        out = low + (high - low) * u
        return float(out[0]) if n is None else out

    def normal(self, mean: float = 0.0, std: float = 1.0, n: int | None = None):
        """Gaussian doubles via Box-Muller; scalar when n is None."""
        m = 1 if n is None else n
        pairs = (m + 1) // 2
        raw = self._raw_block(2 * pairs).reshape(pairs, 2)
        u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        out = mean + std * z[:m]
        return float(out[0]) if n is None else out

    def unit_vector(self, dim: int) -> np.ndarray:
        """Uniform random direction: normalized Gaussian sample (dim >= 1)."""
        while True:
            v = self.normal(n=dim)
            norm = float(np.sqrt(np.dot(v, v)))
            if norm > 1e-12:
                return v / norm

    def shuffle(self, items: list) -> list:
        """Fisher-Yates: for i = len-1 .. 1, swap i with j = raw mod (i+1)."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            out[i], out[j] = out[j], out[i]
        return out
