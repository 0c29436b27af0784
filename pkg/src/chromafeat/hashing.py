"""Deterministic 64-bit hashing primitives.

Python's builtin ``hash()`` is salted per process, so every hash that feeds a
persisted artifact (feature ids, split assignment, edge sharding, hashed
projections) goes through the explicit mixers below instead.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer; a fixed bijection on 64-bit integers."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix64_array(a: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array."""
    a = a.astype(np.uint64, copy=True)
    a ^= a >> np.uint64(30)
    a *= np.uint64(0xBF58476D1CE4E5B9)
    a ^= a >> np.uint64(27)
    a *= np.uint64(0x94D049BB133111EB)
    a ^= a >> np.uint64(31)
    return a


def hash_pair(u: int, v: int) -> int:
    """64-bit hash of an ordered pair, used to shard the edge space."""
    return mix64(mix64(u) ^ ((v + _GOLDEN) & MASK64))


def hash_bytes(data: bytes, seed: int = 0) -> int:
    """64-bit blake2b digest of ``data``, little-endian."""
    h = hashlib.blake2b(data, digest_size=8, key=seed.to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def feature_id_from_string(token: str) -> int:
    """Map a raw feature string to a stable 64-bit feature id.

    Distinct strings collide with probability ~ n^2 / 2^65 (birthday bound);
    about 3% for a billion features, negligible at any practical scale below.
    """
    return hash_bytes(token.encode("utf-8"))


def derive_seed(seed: int, tag: int) -> int:
    """A fixed stream of sub-seeds from one master seed."""
    return mix64(mix64(seed & MASK64) ^ mix64(tag & MASK64))
