"""Counter-based pseudo-random primitives shared by every sampler in the package.

Each draw is a pure function of (seed, counter): there is no generator state
to advance, so draws can be produced in any order, split across workers, and
still reproduce bit for bit.  The mixing function is the SplitMix64 finalizer
applied to ``seed + (counter + 1) * GOLDEN`` modulo 2**64.

Three equivalent implementations exist and are tested for bit equality:
plain Python integers (this module), vectorized numpy uint64 (this module),
and the jitted loops in ``_kernels``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB

# Domain separation between scenario streams and per-sample seed derivation.
SAMPLE_SALT = 0x5851F42D4C957F2D

_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def stream_u64(seed: int, counter: int) -> int:
    """The ``counter``-th 64-bit word of the stream identified by ``seed``."""
    return mix64((seed + (counter + 1) * GOLDEN) & MASK64)


def u64_to_unit(u: int) -> float:
    """Map a 64-bit word to a float in [0, 1) using its top 53 bits."""
    return (u >> 11) * _INV_2_53


def unit_draw(seed: int, counter: int) -> float:
    return u64_to_unit(stream_u64(seed, counter))


def derive_seed(base_seed: int, index: int) -> int:
    """Independent child seed for sample ``index`` of a run keyed by ``base_seed``.

    Mixing goes through a salted stream so that child seeds never collide with
    the scenario stream of ``base_seed`` itself.
    """
    return mix64(((base_seed ^ SAMPLE_SALT) + (index + 1) * GOLDEN) & MASK64)


# --- numpy uint64 versions (silent wraparound on arrays) ---

_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_UMIX_A = np.uint64(MIX_A)
_UMIX_B = np.uint64(MIX_B)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _U30)) * _UMIX_A
    z = (z ^ (z >> _U27)) * _UMIX_B
    return z ^ (z >> _U31)


def stream_u64_array(seed: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized ``stream_u64`` over an array of counters."""
    counters = np.asarray(counters, dtype=np.uint64)
    base = np.uint64(seed & MASK64)
    step = np.uint64(GOLDEN)
    return mix64_array(base + (counters + np.uint64(1)) * step)


def unit_array(u: np.ndarray) -> np.ndarray:
    return (np.asarray(u, dtype=np.uint64) >> _U11).astype(np.float64) * _INV_2_53


def derive_seed_array(base_seed: int, n: int) -> np.ndarray:
    """Vectorized ``derive_seed`` for indices 0..n-1 (uint64 output)."""
    base = np.uint64((base_seed ^ SAMPLE_SALT) & MASK64)
    idx = np.arange(1, n + 1, dtype=np.uint64)
    return mix64_array(base + idx * np.uint64(GOLDEN))
