"""Deterministic per-particle random streams.

Each stream is a numpy Philox generator whose 128-bit key is packed from the
master seed, a purpose tag, the replication index and the particle index.
Philox is counter-based, so distinct keys give independent streams and a
stream is replayed by rebuilding it from its key. Draws are buffered in
blocks; the sequence seen by a stream does not depend on the block size.
"""

from __future__ import annotations

import enum

import numpy as np

MASK64 = (1 << 64) - 1


class Purpose(enum.IntEnum):
    NOISE = 0
    INIT = 1
    TWIN_INIT = 2
    SAMPLER = 3


def stream_key(seed: int, purpose: Purpose, replication: int, particle: int) -> np.ndarray:
    if not 0 <= replication < (1 << 30):
        raise ValueError("replication index out of range")
    if not 0 <= particle < (1 << 32):
        raise ValueError("particle index out of range")
    lo = (int(purpose) << 62) | (replication << 32) | particle
    return np.array([int(seed) & MASK64, lo], dtype=np.uint64)


def make_generator(seed: int, purpose: Purpose = Purpose.NOISE, replication: int = 0,
                   particle: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, purpose, replication, particle)))


class NoiseSource:
    """Standard Gaussian increments for a ``(replications, n)`` block of particles.

    ``replications`` lists the global replication indices held here, so a
    chunk of replications processed by one worker draws exactly what the
    same replications would draw in a serial run.
    """

    def __init__(self, seed: int, n: int, replications=(0,), block: int = 256):
        self.seed = int(seed)
        self.n = int(n)
        self.replications = np.asarray(list(replications), dtype=np.int64)
        self.block = int(block)
        self._gens = [
            [make_generator(self.seed, Purpose.NOISE, int(r), i) for i in range(self.n)]
            for r in self.replications
        ]
        self._buf = np.empty((len(self.replications), self.n, 0))
        self._pos = 0
        self.steps_drawn = 0

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.replications), self.n

    def _refill(self) -> None:
        buf = np.empty((len(self.replications), self.n, self.block))
        for r, row in enumerate(self._gens):
            for i, g in enumerate(row):
                buf[r, i] = g.standard_normal(self.block)
        self._buf = buf
        self._pos = 0

    def next(self) -> np.ndarray:
        """Increments for one step, shape ``(replications, n)``."""
        if self._pos >= self._buf.shape[2]:
            self._refill()
        out = np.ascontiguousarray(self._buf[:, :, self._pos])
        self._pos += 1
        self.steps_drawn += 1
        return out


def uniforms(seed: int, purpose: Purpose, replications, n: int) -> np.ndarray:
    """One block of ``n`` uniforms per replication, from a per-replication stream."""
    reps = list(replications)
    out = np.empty((len(reps), n))
    for k, r in enumerate(reps):
        out[k] = make_generator(seed, purpose, int(r), 0).random(n)
    return out
