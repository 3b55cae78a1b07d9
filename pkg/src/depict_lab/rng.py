"""Counter-based stream derivation.

Every random decision in the lab is keyed by a path such as
``(seed, "task", 3, "perm", j, p)``.  Keys are derived by hashing the path,
so a cell's stream does not depend on how many draws other cells made or on
the order in which workers ran.
"""
from __future__ import annotations

import zlib
from typing import Union

import numba
import numpy as np

PathItem = Union[int, str]
KeyLike = Union[int, np.random.Generator]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK63 = (1 << 63) - 1


def _path_int(item: PathItem) -> int:
    if isinstance(item, str):
        return zlib.crc32(item.encode("utf-8"))
    if item < 0:
        raise ValueError(f"stream path items must be non-negative, got {item}")
    return int(item)


def derive_key(seed: int, *path: PathItem) -> int:
    """63-bit key for the stream named by ``path`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_path_int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) & _MASK63


def stream(seed: int, *path: PathItem) -> np.random.Generator:
    """A Philox generator keyed by ``derive_key(seed, *path)``."""
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *path)))


def as_key(rng: KeyLike) -> int:
    """Turn a generator (one draw consumed) or an explicit integer into a kernel key."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, _MASK63, dtype=np.int64, endpoint=True))
    return int(rng) & _MASK63


@numba.njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def split_key(key, index):
    """Key of the ``index``-th child stream; pure function of (key, index)."""
    k = np.uint64(key)
    i = np.uint64(index)
    return mix64(mix64(k) ^ (i * _GOLDEN + np.uint64(0x632BE59BD9B4E019))) & np.uint64(_MASK63)


@numba.njit(cache=True, nogil=True)
def next_u64(state):
    # splitmix64: output = mix(key + counter * golden)
    state[0] += _GOLDEN
    return mix64(state[0])


@numba.njit(cache=True, nogil=True)
def next_float(state):
    return (next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True, nogil=True)
def next_int(state, lo, hi):
    """Uniform integer in the closed range [lo, hi]."""
    span = hi - lo + 1
    return lo + int(next_float(state) * span)


@numba.njit(cache=True, nogil=True)
def next_normal(state):
    u1 = next_float(state)
    u2 = next_float(state)
    if u1 < 1e-300:
        u1 = 1e-300
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@numba.njit(cache=True, nogil=True)
def _row_keys(key, n):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = np.int64(split_key(key, i))
    return out


def row_keys(key: int, n: int) -> np.ndarray:
    """Per-row keys of a dataset stream, as used by batch generation."""
    return _row_keys(np.uint64(key), n)
