"""Keyed random streams.

Every random draw in the package comes from a PCG64 generator seeded by
``SeedSequence(seed, spawn_key=key)``. A stream is therefore a pure function
of ``(seed, key)`` and does not depend on how many other streams were used
before it, which keeps corpora and training runs independent of visit order.
"""

from __future__ import annotations

import numpy as np

# Stream purposes. Values are part of the reproducibility contract: changing
# one changes every corpus / run that uses it.
SYNTH_MEANS = 1
SYNTH_VIDEO = 2
INIT_PARAMS = 3
SHUFFLE = 4
DROPOUT = 5

SPLIT_CODES = {"train": 0, "test": 1}


def stream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def split_code(split: str) -> int:
    try:
        return SPLIT_CODES[split]
    except KeyError:
        raise ValueError(f"unknown split {split!r}; expected one of {sorted(SPLIT_CODES)}") from None
