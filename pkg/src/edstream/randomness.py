"""Labeled seed derivation and a keyed 64-bit hash usable on numpy arrays."""

from __future__ import annotations

import hashlib

import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MASK64 = (1 << 64) - 1


def _seed_key(seed: int) -> bytes:
    return (int(seed) & ((1 << 128) - 1)).to_bytes(16, "little")


def derive_seed(seed: int, *labels: object) -> int:
    """64-bit sub-seed for ``labels`` under the 128-bit master ``seed``."""
    h = hashlib.blake2b(digest_size=8, key=_seed_key(seed))
    for lab in labels:
        h.update(repr(lab).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def rng(seed: int, *labels: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))


def mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64 arrays (wrapping arithmetic)."""
    x = np.asarray(x, dtype=np.uint64)
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def keyed_hash(key: int | np.ndarray, x: np.ndarray) -> np.ndarray:
    """Pseudorandom 64-bit value of ``x`` under ``key``; broadcasts over both."""
    k = np.asarray(key, dtype=np.uint64)
    x = np.asarray(x, dtype=np.uint64)
    return mix64(mix64(x * _GOLDEN + k) ^ k)


def trailing_zeros(x: np.ndarray, cap: int) -> np.ndarray:
    """Number of trailing zero bits of each entry, clipped to ``cap``."""
    x = np.asarray(x, dtype=np.uint64)
    low = x & (~x + np.uint64(1))
    out = np.full(x.shape, cap, dtype=np.int64)
    nz = low != 0
    out[nz] = np.minimum(np.log2(low[nz].astype(np.float64)).astype(np.int64), cap)
    return out
