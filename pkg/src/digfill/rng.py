"""Deterministic seed derivation for pipeline stages and per-cluster streams."""

import zlib

import numpy as np


def stage_seed(seed: int, name: str) -> int:
    """Seed for a named stage; a pure function of (seed, name)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


def substream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(key)]))
