"""Deterministic, platform-independent random number generation.

All randomness in the package flows through a counter-based SplitMix64
generator (64-bit xorshift family): draw ``t`` of stream ``seed`` is
``mix(seed + (t+1) * GOLDEN)``.  Because every draw is addressed by an
explicit counter, outputs do not depend on iteration strategy or platform,
and the numba and numpy code paths consume identical streams.

Normal variates use Box-Muller and burn two uniforms each, so the entry at
counter ``c`` of a normal stream reads uniforms ``2c`` and ``2c+1``.
"""

import hashlib

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / (1 << 53)
_MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_seed(seed: int, stage: str) -> int:
    """Stable 63-bit sub-seed for a named pipeline stage."""
    digest = hashlib.blake2b(f"{seed}\x1f{stage}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def mix64(z):
    """SplitMix64 finalizer over a uint64 scalar or array."""
    z = np.asarray(z, dtype=np.uint64)
    z = z ^ (z >> np.uint64(30))
    z = z * _MIX1
    z = z ^ (z >> np.uint64(27))
    z = z * _MIX2
    z = z ^ (z >> np.uint64(31))
    return z


def raw64(seed: int, counters):
    counters = np.asarray(counters, dtype=np.uint64)
    state = np.uint64(seed & _MASK64) + (counters + np.uint64(1)) * GOLDEN
    return mix64(state)


def uniforms(seed: int, start: int, n: int) -> np.ndarray:
    """``n`` doubles in [0, 1) from counters ``start .. start+n-1``."""
    return (raw64(seed, np.arange(start, start + n, dtype=np.uint64)) >> np.uint64(11)) * _INV_2_53


def uniform_matrix(seed: int, start: int, shape: tuple, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Row-major matrix of uniforms in [lo, hi)."""
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    u = uniforms(seed, start, n)
    return (lo + u * (hi - lo)).reshape(shape)


def normals(seed: int, start: int, n: int) -> np.ndarray:
    """``n`` standard normals; entry i consumes uniform counters 2(start+i), 2(start+i)+1."""
    base = 2 * start
    u = uniforms(seed, base, 2 * n)
    u1 = 1.0 - u[0::2]  # (0, 1], keeps log() finite
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def normal_matrix(seed: int, start: int, shape: tuple) -> np.ndarray:
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    return normals(seed, start, n).reshape(shape)


def permutation(seed: int, n: int) -> np.ndarray:
    """Deterministic permutation of range(n): argsort of per-index random keys."""
    keys = raw64(seed, np.arange(n, dtype=np.uint64))
    return np.argsort(keys, kind="stable")
