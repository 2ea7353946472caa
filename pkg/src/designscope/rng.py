"""Deterministic, index-keyed random streams.

Every parallel unit of work (one feature vector, one ensemble member, ...)
gets its own substream keyed by its index, so results never depend on how
work is scheduled across processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RngStream:
    master_seed: int
    stream_index: int = 0
    parent_key: tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.key)
        self.generator = np.random.default_rng(seq)

    @property
    def key(self) -> tuple[int, ...]:
        return self.parent_key + (self.stream_index,)

    def child(self, index: int) -> RngStream:
        """Independent substream ``index`` nested under this stream."""
        return RngStream(self.master_seed, index, self.key)


def as_generator(rng: RngStream | np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
