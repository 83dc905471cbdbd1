"""Named random streams derived from one global seed.

Every consumer of randomness asks for a stream by purpose name (plus optional
integer sub-keys such as a cluster pair or an item index). Streams are built
from ``SeedSequence(seed, spawn_key=...)`` so they are statistically
independent and adding a new consumer never shifts the draws of another.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("assignment", "labels", "weights", "references", "power", "ties")

_MAX_SEED = 2**64


def _name_key(name: str) -> int:
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    return zlib.crc32(name.encode("ascii"))


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Return the generator for purpose ``name`` under ``seed``.

    Args:
        seed: global unsigned 64-bit seed.
        name: one of :data:`STREAMS`.
        *keys: non-negative integers that further split the stream, e.g.
            ``stream(seed, "labels", i, j)`` for the (i, j) cluster block.
    """
    spawn_key = (_name_key(name),) + tuple(int(k) for k in keys)
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(ss))
