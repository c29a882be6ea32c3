"""Reproducible random streams.

Every stream is a counter-based Philox generator keyed by
``(seed, *stream_key)``, so blocks of work can run on any number of
workers and still draw exactly the same numbers.
"""

import os

import numpy as np
from scipy.special import ndtri

SEED_ENV = "TABPOWER_SEED"
_TWO53 = float(2**53)


def resolve_seed(seed=None) -> int:
    """Explicit seed, else ``$TABPOWER_SEED``, else fresh OS entropy."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env:
        return int(env)
    return int(np.random.SeedSequence().entropy % 2**63)


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def uniforms(gen: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1), from 53-bit integers."""
    k = gen.integers(0, 2**53, size=size, dtype=np.int64)
    return (k + 0.5) / _TWO53


def std_normals(gen: np.random.Generator, size) -> np.ndarray:
    """Standard normals by inversion of the normal CDF."""
    return ndtri(uniforms(gen, size))


def derive_seed(seed: int, *key: int) -> int:
    """Independent 63-bit sub-seed for one configuration of a larger run."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
