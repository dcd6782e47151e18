"""Counter-based random streams.

Every random draw in the library flows through a Philox generator keyed by
an explicit (seed, *path) tuple, so independent components (system draw,
per-trial schedules, Monte-Carlo sampling) get reproducible, collision-free
streams and classical/quantum runs can replay identical schedules.
"""
from __future__ import annotations

import numpy as np


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator for a (seed, *path) key.

    The same key always yields the same stream; distinct keys yield
    statistically independent streams (Philox counter keying).
    """
    if len(path) > 4:
        raise ValueError("stream path supports at most 4 components")
    counter = list(path) + [0] * (4 - len(path))
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def trial_stream(seed: int, trial: int, purpose: int = 0) -> np.random.Generator:
    """Stream for one trial of an experiment, split by purpose."""
    return stream(seed, trial, purpose)
