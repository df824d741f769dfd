"""Deterministic random-number plumbing.

Everything stochastic in the package draws from numpy's PCG64 generator,
always through an explicitly seeded ``Generator``.  Sub-streams are derived
with ``SeedSequence.spawn``-style keying so that per-image noise does not
depend on processing order or thread count: image ``i`` gets the same draw
whether it is processed first, last, or on another worker thread.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_of(part: int | str) -> int:
    """Map a stream tag to a stable 32-bit integer key."""
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    raise TypeError(f"rng key parts must be int or str, got {type(part).__name__}")


def rng_for(seed: int, *parts: int | str) -> np.random.Generator:
    """Return a PCG64 generator for the sub-stream named by ``parts``.

    ``rng_for(seed, 7, "noise")`` is independent of ``rng_for(seed, 7,
    "mask")`` and of every other image index, and identical across runs.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_key_of(p) for p in parts]
    return np.random.default_rng(np.random.SeedSequence(entropy))
