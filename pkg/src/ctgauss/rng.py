"""Reproducible random-number streams.

Every stochastic routine in this package takes an explicit :class:`RngSeed`.
A seed is a (master, stream) pair; the generator behind it is the
counter-based Philox engine keyed through ``numpy``'s ``SeedSequence`` with
``spawn_key=(stream,)``, so identical (master, stream) pairs produce
bit-identical draws regardless of execution order, thread schedule or how
many other streams were consumed in between.

Independent sub-streams (one per Monte Carlo trial, per codebook, ...) are
derived with :meth:`RngSeed.child`, which encodes the derivation path into
the stream index (base ``2**20``), so distinct paths never collide at desk
scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Children per node in the stream-derivation tree; nesting is shallow
# (experiment -> trial -> role), so indices stay far below 2**63.
_STREAM_FANOUT = 2**20


@dataclass(frozen=True)
class RngSeed:
    """Addressable random stream: (master seed, stream index)."""

    master: int
    stream: int = 0

    def __post_init__(self):
        if self.stream < 0:
            raise ValueError(f"stream index must be nonnegative, got {self.stream}")

    def generator(self) -> np.random.Generator:
        """Fresh Philox generator for this (master, stream) pair."""
        ss = np.random.SeedSequence(entropy=self.master, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngSeed":
        """Derived independent stream; ``index`` must be < 2**20 - 1."""
        if not 0 <= index < _STREAM_FANOUT - 1:
            raise ValueError(f"child index out of range: {index}")
        return RngSeed(self.master, self.stream * _STREAM_FANOUT + index + 1)
