"""Multinomial sampling and replicate statistics.

Replicates are generated in fixed blocks of :data:`BLOCK`; block ``b``
draws from the stream keyed by ``(seed, b)``. Any worker count therefore
produces identical replicate arrays.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernels import batch_statistics
from .rng import stream
from .tables import CountTable, DomainError, JointTable

BLOCK = 2048
_COUNT_TAG = 0xC0
_REP_TAG = 0xB1


def multinomial_block(gen: np.random.Generator, probs, n: int, size: int) -> np.ndarray:
    """``size`` multinomial draws via sequential conditional binomials.

    Returns an int64 array of shape ``(size, K)`` for ``K = len(probs)``.
    """
    p = np.asarray(probs, dtype=np.float64).ravel()
    K = p.size
    # suffix sums: remaining mass from cell k onward
    tail = np.cumsum(p[::-1])[::-1]
    out = np.empty((size, K), dtype=np.int64)
    remaining = np.full(size, int(n), dtype=np.int64)
    for k in range(K - 1):
        if tail[k] <= 0.0:
            out[:, k:] = 0
            break
        cond = min(p[k] / tail[k], 1.0)
        draw = gen.binomial(remaining, cond)
        out[:, k] = draw
        remaining -= draw
    else:
        out[:, K - 1] = remaining
    return out


def sample_counts(table: JointTable, n: int, seed: int) -> CountTable:
    """One multinomial table of ``n`` observations."""
    if n < 1:
        raise DomainError("n must be at least 1")
    gen = stream(seed, _COUNT_TAG)
    flat = multinomial_block(gen, table.probs, n, 1)[0]
    return CountTable(flat.reshape(table.shape))


@dataclass(frozen=True)
class ReplicateStats:
    """Unscaled statistics for each replicate, in replicate order."""

    pearson: np.ndarray
    dhat: np.ndarray
    dtilde: np.ndarray
    zero_marginal: np.ndarray
    n: int

    @property
    def replications(self) -> int:
        return self.dhat.size


def _block(table_probs, shape, n, seed, b, size):
    gen = stream(seed, _REP_TAG, b)
    # always draw a full block so a shorter run is a prefix of a longer one
    counts = multinomial_block(gen, table_probs, n, BLOCK)[:size].reshape(size, *shape)
    return batch_statistics(counts, n)


def simulate_statistics(table: JointTable, n: int, replications: int, seed: int, workers: int = 1) -> ReplicateStats:
    """Draw ``replications`` tables of size ``n`` and compute all three statistics."""
    if replications < 1:
        raise DomainError("replications must be at least 1")
    if n < 4:
        raise DomainError("simulation needs n >= 4 for the unbiased statistic")
    sizes = [min(BLOCK, replications - s) for s in range(0, replications, BLOCK)]
    args = [(table.probs, table.shape, n, seed, b, size) for b, size in enumerate(sizes)]
    if workers > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _block(*a), args))
    else:
        parts = [_block(*a) for a in args]
    pearson, dhat, dtilde, zero = (np.concatenate(x) for x in zip(*parts))
    return ReplicateStats(pearson, dhat, dtilde, zero, int(n))
