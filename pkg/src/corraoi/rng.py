"""Named, independently seeded random streams.

Every stochastic component (instance generation, scheduling, correlation
draws, mobility) pulls from its own stream, all derived from one experiment
seed through SeedSequence spawn keys.  Enabling an extra stream, say
mobility, therefore never shifts the draws seen by another stream.
"""
from __future__ import annotations

import numpy as np

STREAMS = {
    "instance": 0,
    "scheduling": 1,
    "correlation": 2,
    "mobility": 3,
}


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    """Generator for the named stream of the given experiment seed."""
    try:
        key = STREAMS[stream]
    except KeyError:
        raise ValueError(f"unknown stream {stream!r}; expected one of {sorted(STREAMS)}") from None
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))
