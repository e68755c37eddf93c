"""Deterministic random streams.

Every random draw in the package comes from a stream addressed by
``(seed, purpose, index)``.  Streams are derived with
:class:`numpy.random.SeedSequence` spawn keys, so the variates attached to a
given mode never depend on how many other modes are simulated, on the order
modes are visited, or on how work is split across threads.
"""

from __future__ import annotations

import numpy as np

# Spawn-key tags separating independent uses of the same master seed.
NOISE = 0
MONTE_CARLO = 1
SAMPLER = 2
AUX = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``seed`` addressed by the integer ``key`` path."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))))


def mode_stream(seed: int, mode: int, tag: int = NOISE) -> np.random.Generator:
    """Stream owning all noise of one spectral mode (0-based ``mode``)."""
    return stream(seed, tag, mode)
