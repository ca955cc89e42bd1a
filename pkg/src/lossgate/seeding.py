"""Seed derivation policy: every random draw in a run descends from one
global seed through a named, numbered substream, so any stage can be rerun
in isolation and reproduce its part of a full run bit for bit."""

from __future__ import annotations

import numpy as np

# substream ids; changing these changes every derived rng
STREAMS = {
    "corpus": 0,
    "trials": 1,
    "encoder_init": 2,
    "classifier_init": 3,
    "cluster": 4,
    "stage1": 5,
    "stage2": 6,
    "toy": 7,
}


def child_rng(seed: int, name: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAMS[name], *map(int, extra)]))


def child_seed(seed: int, name: str, *extra: int) -> int:
    ss = np.random.SeedSequence([int(seed), STREAMS[name], *map(int, extra)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
