"""Deterministic random stream management.

Every stochastic operation in the package draws from a RandomSource, a frozen
(master_seed, stream_id) pair. A fresh numpy Generator is built for each
operation, so the same RandomSource always yields the same draws no matter how
many times or in which order it is used. Child streams come from derive(),
which folds keys into a new 64-bit stream id; distinct key paths give
independent streams under the same master seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # Steele et al.'s SplitMix64 finalizer; good avalanche, cheap, stdlib-free.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _key64(key) -> int:
    if isinstance(key, bool):
        raise DomainError("derive keys must be non-negative ints or strings")
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise DomainError("derive keys must be non-negative")
        return int(key) & _MASK64
    if isinstance(key, str):
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise DomainError(f"derive keys must be ints or strings, got {type(key).__name__}")


@dataclass(frozen=True)
class RandomSource:
    """Value-semantic random stream: (master_seed, stream_id).

    master_seed must be a non-negative int (< 2**64); stream_id is managed by
    derive() and defaults to 0 for a root source.
    """

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not isinstance(self.master_seed, (int, np.integer)) or isinstance(self.master_seed, bool):
            raise DomainError("master_seed must be an int")
        if not (0 <= int(self.master_seed) < (1 << 64)):
            raise DomainError("master_seed must lie in [0, 2**64)")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def derive(self, *keys) -> "RandomSource":
        """Fold keys (non-negative ints or strings) into a child stream id."""
        if not keys:
            raise DomainError("derive requires at least one key")
        h = self.stream_id
        for key in keys:
            h = _splitmix64(h ^ _key64(key))
        return RandomSource(self.master_seed, h)

    def generator(self) -> np.random.Generator:
        """Fresh PCG64 generator for this stream; never cached."""
        seq = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(self.stream_id & 0xFFFFFFFF, self.stream_id >> 32),
        )
        return np.random.Generator(np.random.PCG64(seq))

    def tree_seed(self) -> int:
        """64-bit seed for the in-kernel feature-subset PRNG of random trees."""
        return int(self.generator().integers(0, 1 << 63, dtype=np.uint64))
