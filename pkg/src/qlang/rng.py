"""Deterministic random streams.

Every stochastic operation takes an integer seed plus a tuple of stream
indices (repetition number, probe number, trial number, ...).  Streams are
derived with a counter-based Philox generator keyed by
``SeedSequence(entropy=seed, spawn_key=stream)``, so parallel and serial
execution of independent sub-tasks draw from identical streams.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the sub-stream ``stream`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *stream: int) -> int:
    """Integer seed for the sub-stream, usable as a fresh master seed."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream))
    return int(ss.generate_state(1, np.uint64)[0])
