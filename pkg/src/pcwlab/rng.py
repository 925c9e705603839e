"""Counter-based keyed random numbers.

Every draw is a pure function of ``(seed, tag, key, draw)``: the same tuple
always yields the same number, independent of call order.  This is what lets
data generation, training and evaluation share common random numbers and run
per-customer work in any order.

The mixer is the SplitMix64 finaliser applied along a hash chain.
"""
from __future__ import annotations

import hashlib

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def tag_hash(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def _as_u64(x) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype.kind == "i" and np.any(a < 0):
        raise ValueError("keys and draw indices must be non-negative")
    return np.atleast_1d(a).astype(np.uint64)


def raw64(seed: int, tag: str, key, draw) -> np.ndarray:
    """Raw 64-bit words, broadcasting over ``key`` and ``draw``."""
    with np.errstate(over="ignore"):
        base = _mix(np.array([(seed & 0xFFFFFFFFFFFFFFFF) ^ tag_hash(tag)], dtype=np.uint64))
        h = _mix(base + (_as_u64(key) + np.uint64(1)) * _GOLDEN)
        return _mix(h + (_as_u64(draw) + np.uint64(1)) * _M2)


def uniform(seed: int, tag: str, key, draw=0) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    k = raw64(seed, tag, key, draw) >> np.uint64(11)
    return (k.astype(np.float64) + 0.5) * _INV_2_53


def normal(seed: int, tag: str, key, draw=0, mean=0.0, sd=1.0) -> np.ndarray:
    return mean + sd * ndtri(uniform(seed, tag, key, draw))


def integers(seed: int, tag: str, key, draw, n: int) -> np.ndarray:
    """Uniform integers in ``[0, n)``."""
    u = uniform(seed, tag, key, draw)
    return np.minimum((u * n).astype(np.int64), n - 1)


class Stream:
    """A keyed stream: successive draws for one (seed, tag, key) triple.

    Draw indices are explicit so any single draw can be replayed in isolation.
    """

    def __init__(self, seed: int, tag: str, key: int = 0):
        self.seed = int(seed)
        self.tag = tag
        self.key = int(key)

    def uniform(self, draw: int = 0) -> float:
        return float(uniform(self.seed, self.tag, self.key, draw)[0])

    def normal(self, draw: int = 0, mean: float = 0.0, sd: float = 1.0) -> float:
        return float(normal(self.seed, self.tag, self.key, draw, mean, sd)[0])

    def integer(self, n: int, draw: int = 0) -> int:
        return int(integers(self.seed, self.tag, self.key, draw, n)[0])

    def child(self, key: int) -> "Stream":
        return Stream(self.seed, self.tag, key)

    def __repr__(self) -> str:
        return f"Stream(seed={self.seed}, tag={self.tag!r}, key={self.key})"
