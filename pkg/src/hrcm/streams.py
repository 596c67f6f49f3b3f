"""Reproducible random-stream derivation.

Every stochastic component draws from a counter-based Philox generator
keyed by (seed, path), where the path is a small tuple of non-negative
integers uniquely naming the consumer (block, realization, trial, ...).
Streams are therefore independent of execution order and thread layout.
"""

from __future__ import annotations

import os

import numpy as np

# path namespaces
NS_BLOCK = 0        # (NS_BLOCK, realization, level, target_cell, source_cell)
NS_REALIZATION = 1  # (NS_REALIZATION, index)
NS_POINTS = 2       # point placement
NS_DENSITY = 3      # density draws
NS_VECTOR = 4       # x-vector draws
NS_TRIAL = 5        # analysis Monte-Carlo trials


def derive_stream(seed: int, block_id: tuple[int, ...]) -> np.random.Generator:
    """Independent, reproducible generator for (seed, block_id)."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    entropy = (int(seed),) + tuple(int(v) & 0xFFFFFFFFFFFFFFFF for v in block_id)
    ss = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(ss))


def thread_count() -> int:
    """Worker cap from HRCM_THREADS (default 1)."""
    raw = os.environ.get("HRCM_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)
