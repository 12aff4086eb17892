"""Deterministic, key-addressable random streams.

Every stochastic draw in the simulator comes from a stream addressed by a
content key (seed plus integer/string tags), never from shared global state.
Two access patterns are provided:

* :func:`stream` returns a counter-based bit generator (Philox) for bulk
  sampling, e.g. the per-surface spawn draws.  Streams with distinct keys are
  independent, and the same key always replays the same sequence, so work can
  be partitioned across threads or processes without changing results.
* :func:`normals_at` evaluates a keyed Gaussian lattice at explicit counters,
  used for per-path fading innovations where consumption order must not
  matter at all.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _tag_to_u64(tag) -> np.uint64:
    if isinstance(tag, (int, np.integer)):
        return np.uint64(int(tag) & 0xFFFFFFFFFFFFFFFF)
    if isinstance(tag, str):
        digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
        return np.uint64(int.from_bytes(digest, "little"))
    raise TypeError(f"unsupported stream tag type: {type(tag).__name__}")


def splitmix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """Avalanche a 64-bit value (vectorized); the splitmix64 finalizer."""
    z = (np.uint64(x) + _GOLDEN) & _U64
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _U64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _U64
    return z ^ (z >> np.uint64(31))


def key_of(seed: int, *tags) -> int:
    """Fold a seed and tags into one 64-bit stream key."""
    with np.errstate(over="ignore"):
        h = splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        for tag in tags:
            h = splitmix64(h ^ _tag_to_u64(tag))
    return int(h)


def stream(seed: int, *tags) -> np.random.Generator:
    """Counter-based generator addressed by (seed, tags)."""
    return np.random.Generator(np.random.Philox(key=key_of(seed, *tags)))


def uniforms_for(keys, counters) -> np.ndarray:
    """Uniform(0, 1) values (endpoints excluded) at (key, counter) pairs."""
    keys = np.atleast_1d(np.asarray(keys, dtype=np.uint64))
    counters = np.atleast_1d(np.asarray(counters, dtype=np.uint64))
    with np.errstate(over="ignore"):
        bits = splitmix64(keys ^ splitmix64(counters))
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals_for(keys, counters) -> np.ndarray:
    """Standard-normal values at (key, counter) pairs (inverse-CDF)."""
    return ndtri(uniforms_for(keys, counters))


def uniforms_at(key: int, counters) -> np.ndarray:
    """Uniform(0, 1) values of one keyed stream at explicit counters."""
    counters = np.atleast_1d(np.asarray(counters, dtype=np.uint64))
    return uniforms_for(np.full(counters.shape, key, dtype=np.uint64), counters)


def normals_at(key: int, counters) -> np.ndarray:
    """Standard-normal values at explicit counters (inverse-CDF transform)."""
    return ndtri(uniforms_at(key, counters))


def fold_keys(seed_key, columns: np.ndarray) -> np.ndarray:
    """Vectorized key derivation: fold integer columns into a base key.

    Equivalent to chaining :func:`key_of` tag folds over each row of
    ``columns`` starting from ``seed_key``.
    """
    h = np.full(columns.shape[0] if columns.ndim == 2 else 1, seed_key, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for col in np.atleast_2d(columns.T):
            h = splitmix64(h ^ col.astype(np.uint64))
    return h


def hash_bytes(data: bytes) -> int:
    """64-bit content hash used for scene/spawn consistency checks."""
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")
