"""Deterministic random-stream derivation.

Every stochastic operation in the package draws from a generator built
here, keyed by a tuple of non-negative integers. Identical keys yield
bit-identical streams; distinct keys yield independent streams. Stream
tags keep unrelated consumers (dropout, shuffling, sampling, ...) from
sharing draws even under the same base seed.
"""

import numpy as np

from .errors import InvalidArgumentError

STREAM_INIT = 1
STREAM_DROPOUT = 2
STREAM_SHUFFLE = 3
STREAM_IMPRECISION = 4
STREAM_EVAL = 5


def check_seed(seed, name: str = "seed") -> int:
    """Validate and return a non-negative integer seed."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or seed < 0:
        raise InvalidArgumentError(f"{name} must be a non-negative integer, got {seed!r}")
    return int(seed)


def spawn_generator(*key: int) -> np.random.Generator:
    """Build a Generator from a tuple of non-negative integers."""
    parts = tuple(check_seed(k, "seed component") for k in key)
    if not parts:
        raise InvalidArgumentError("seed key must not be empty")
    return np.random.default_rng(np.random.SeedSequence(parts))
