"""Deterministic, platform-independent RNG substreams.

Every stochastic operation in this package draws from a stream keyed by
(master_seed, stream_id). Child streams are derived by hashing string/int
tags into the stream id, so parallel workers can reproduce any cell of an
experiment without coordinating: identical (master_seed, stream_id) always
yields identical draws regardless of platform, thread count, or the order
in which sibling streams are consumed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RngSeed", "as_seed"]

_MASK64 = (1 << 64) - 1


def _tag_bytes(tag) -> bytes:
    if isinstance(tag, (bool, np.bool_)):
        raise TypeError("bool is not a valid stream tag")
    if isinstance(tag, (int, np.integer)):
        return b"i" + int(tag).to_bytes(16, "little", signed=True)
    if isinstance(tag, str):
        return b"s" + tag.encode("utf-8")
    raise TypeError(f"stream tags must be int or str, got {type(tag).__name__}")


@dataclass(frozen=True)
class RngSeed:
    """A (master_seed, stream_id) pair identifying one random stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def child(self, *tags) -> "RngSeed":
        """Derive a sub-stream keyed by the given tags (ints or strings)."""
        h = hashlib.sha256()
        h.update(self.stream_id.to_bytes(8, "little"))
        for tag in tags:
            h.update(_tag_bytes(tag))
        return RngSeed(self.master_seed, int.from_bytes(h.digest()[:8], "little"))

    def generator(self) -> np.random.Generator:
        """PCG64 generator for this exact stream."""
        seq = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(self.stream_id & 0xFFFFFFFF, self.stream_id >> 32),
        )
        return np.random.Generator(np.random.PCG64(seq))


def as_seed(seed) -> RngSeed:
    """Accept an RngSeed or a bare int master seed."""
    if isinstance(seed, RngSeed):
        return seed
    if isinstance(seed, (int, np.integer)):
        return RngSeed(int(seed))
    raise TypeError(f"seed must be RngSeed or int, got {type(seed).__name__}")
