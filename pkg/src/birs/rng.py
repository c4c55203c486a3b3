"""Seedable, splittable random streams.

Every stream is a Philox4x64 counter-based generator keyed by the pair
``(seed, stream_id)``. Child streams get a new ``stream_id`` derived from the
parent's id and a child index, so any stream can be reached in constant time
without touching its siblings. That is what makes bootstrap replicates and
Monte Carlo runs reproducible independently of how work is split across
threads.

Normal variates come from numpy's ``Generator.standard_normal`` (ziggurat with
fixed tables). Results are reproducible for a given seed on a given numpy
build; agreement with other implementations is not attempted.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _child_id(stream_id: int, index: int) -> int:
    return _splitmix64(_splitmix64(stream_id) ^ _splitmix64(index ^ 0xD1B54A32D192ED03))


class RngStream:
    """A single-owner random stream identified by ``(seed, stream_id)``.

    The stream advances as draws are taken; :meth:`substream` does not depend
    on how far the parent has advanced.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not (0 <= seed <= _MASK64 and 0 <= stream_id <= _MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = seed
        self.stream_id = stream_id
        self._gen = np.random.Generator(np.random.Philox(key=[seed, stream_id]))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id:#018x})"

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy generator (shares state with this stream)."""
        return self._gen

    def substream(self, index: int) -> "RngStream":
        index = int(index)
        if not 0 <= index <= _MASK64:
            raise ValueError("substream index must be an unsigned 64-bit integer")
        return RngStream(self.seed, _child_id(self.stream_id, index))

    def standard_normal(self, count: int | tuple[int, ...]) -> np.ndarray:
        return self._gen.standard_normal(count)


def make_rng(seed: int) -> RngStream:
    """Root stream (``stream_id`` 0) for ``seed``."""
    return RngStream(seed, 0)


def substream(parent: RngStream, index: int) -> RngStream:
    return parent.substream(index)


def sample_standard_normal(rng: RngStream, count: int) -> np.ndarray:
    """``count`` i.i.d. N(0, 1) draws; advances ``rng``."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return rng.standard_normal(int(count))


def as_rng(rng: RngStream | int | None) -> RngStream:
    """Accept a stream or a plain integer seed."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        raise TypeError("an RngStream or integer seed is required")
    return make_rng(int(rng))
