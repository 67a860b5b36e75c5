"""Counter-based SplitMix64 random stream.

Every random quantity in the package comes from this generator so runs can be
replayed bit-for-bit, including from other languages.  The layout is:

* state: one unsigned 64-bit counter ``c``.
* step: ``c <- c + 0x9E3779B97F4A7C15 (mod 2**64)``, output ``mix64(c)`` where::

      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
      z = (z ^ (z >> 27)) * 0x94D049BB133111EB
      z =  z ^ (z >> 31)

* uniform double in [0, 1): ``(u64 >> 11) * 2**-53``.

Because the i-th output only depends on ``seed + i * GOLDEN`` the stream can
also be produced in bulk with vectorized numpy, which :func:`uniform_block` does.
"""
from __future__ import annotations

import numba
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (reduced mod 2**64)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(*keys: int) -> int:
    """Fold integer keys into one 64-bit seed.

    ``h = 0; for k in keys: h = mix64((h + GOLDEN) ^ k)``.  Used to give each
    run component (sampler, instance generator, sweep cell) its own stream.
    """
    h = 0
    for k in keys:
        h = mix64(((h + GOLDEN) & MASK64) ^ (int(k) & MASK64))
    return h


class SplitMix64:
    """Pure-Python reference generator; slow, used for small draws and as test oracle."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * INV_2_53


def uniform_block(seed: int, start: int, n: int) -> np.ndarray:
    """Outputs ``start .. start+n-1`` of the stream seeded by ``seed``, as doubles."""
    i = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + i * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * INV_2_53


_GOLDEN_U = np.uint64(GOLDEN)
_MIX1_U = np.uint64(MIX1)
_MIX2_U = np.uint64(MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


@numba.njit(cache=True)
def next_uniform(counter):
    """Advance ``counter`` (np.uint64) once; return ``(u, new_counter)``."""
    c = counter + _GOLDEN_U
    z = c
    z = (z ^ (z >> _S30)) * _MIX1_U
    z = (z ^ (z >> _S27)) * _MIX2_U
    z = z ^ (z >> _S31)
    return np.float64(z >> _S11) * INV_2_53, c


@numba.njit(cache=True)
def inverse_cdf(cdf_row, u):
    """Smallest index ``i`` with ``u < cdf_row[i]``.

    Rows are prepared by :func:`cdf_table`, whose last nonzero entry and
    everything after it are exactly 1.0, so the scan always terminates.
    """
    for i in range(cdf_row.shape[0]):
        if u < cdf_row[i]:
            return i
    return cdf_row.shape[0] - 1


def cdf_table(probs: np.ndarray) -> np.ndarray:
    """Row-wise cumulative sums of a probability table along its last axis.

    From the last strictly positive entry onward the cdf is pinned to 1.0, so
    rounding in the cumulative sum can never select a zero-probability index.
    """
    probs = np.asarray(probs, dtype=np.float64)
    cdf = np.cumsum(probs, axis=-1)
    flat = cdf.reshape(-1, probs.shape[-1])
    src = probs.reshape(-1, probs.shape[-1])
    for row, p in zip(flat, src):
        nz = np.flatnonzero(p > 0)
        if nz.size:
            row[nz[-1]:] = 1.0
    return flat.reshape(probs.shape)
