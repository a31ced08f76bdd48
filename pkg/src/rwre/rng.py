"""Counter-based pseudorandom function used for every random draw in the package.

All randomness is a pure function of integer keys. A key is a tuple of 64-bit
words ``(seed, tag, w_1, ..., w_k)``; the words are absorbed one at a time into
a 64-bit state with the splitmix64 finalizer::

    h = 0x243F6A8885A308D3
    for w in words:
        h = mix64(((h ^ w) + 0x9E3779B97F4A7C15) mod 2**64)

and a uniform in [0, 1) is ``(h >> 11) * 2**-53``.  Signed words are taken
modulo 2**64 (two's complement).  The tag separates the independent streams:
site laws, walk steps, coupling edge stacks and replica seeds.

Two implementations are kept in lockstep: a numpy one that is vectorized over
arrays of keys, and a pure-Python one for scalar walks.  They are tested to
agree bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1

_INIT = 0x243F6A8885A308D3
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 2.0**-53

# stream tags
TAG_SITE = 1
TAG_STEP = 2
TAG_EDGE = 3
TAG_EDGE_ALT = 4
TAG_RESAMPLE = 5
TAG_DERIVE = 6
TAG_ENV = 7
TAG_WALK = 8


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def hash_scalar(*words: int) -> int:
    h = _INIT
    for w in words:
        h = _mix(((h ^ (w & MASK64)) + _GOLDEN) & MASK64)
    return h


def uniform_scalar(*words: int) -> float:
    return (hash_scalar(*words) >> 11) * _INV53


def as_u64(words) -> np.ndarray:
    """Convert ints or integer arrays to uint64 with two's-complement wrap."""
    if isinstance(words, (int, np.integer)):
        return np.array([int(words) & MASK64], dtype=np.uint64)
    # Python sequences go through object dtype so ints >= 2^63 are not coerced to float
    arr = words if isinstance(words, np.ndarray) else np.asarray(words, dtype=object)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype == object:
        return np.array([int(w) & MASK64 for w in arr.ravel()], dtype=np.uint64).reshape(arr.shape)
    if arr.dtype.kind not in "iu":
        raise TypeError(f"seed words must be integers, got dtype {arr.dtype}")
    return arr.astype(np.int64).astype(np.uint64)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def hash_array(*words) -> np.ndarray:
    """Vectorized ``hash_scalar``; words broadcast against each other."""
    with np.errstate(over="ignore"):
        h = np.uint64(_INIT)
        for w in words:
            h = _mix_array((h ^ as_u64(w)) + np.uint64(_GOLDEN))
    return np.atleast_1d(h)


def uniform_array(*words) -> np.ndarray:
    return (hash_array(*words) >> np.uint64(11)).astype(np.float64) * _INV53


def label_word(label: str) -> int:
    """Stable 64-bit word for a text label (used when deriving named streams)."""
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")


def derive_seed(seed: int, *path) -> int:
    """Child seed for a named or indexed sub-stream of ``seed``.

    Path elements may be ints or strings; strings are mapped through
    :func:`label_word`.
    """
    words = [label_word(p) if isinstance(p, str) else int(p) for p in path]
    return hash_scalar(seed, TAG_DERIVE, *words)


def replica_seeds(seed: int, tag: int, indices, *extra) -> np.ndarray:
    """uint64 seeds for replicas ``indices`` of stream ``tag`` under ``seed``."""
    idx = np.asarray(indices, dtype=np.int64)
    return hash_array(seed, tag, idx, *extra)
