"""Shared fixtures and independent oracles for the test suite."""

import itertools
import sys

import numpy as np
import pytest

from tabpower.delta import embed_probs, vec_star
from tabpower.tables import AlternativeSpec, JointTable

SHAPES = [(2, 2), (2, 3), (3, 3), (3, 4), (4, 4), (6, 6)]


def random_alternative(rng: np.random.Generator, shape, scale: float = 0.3) -> AlternativeSpec:
    """Strictly positive table with a perturbation of zero row and column sums."""
    I, J = shape
    r = rng.dirichlet(np.full(I, 4.0))
    s = rng.dirichlet(np.full(J, 4.0))
    base = np.outer(r, s)
    z = rng.standard_normal(shape)
    c = z - z.mean(axis=0, keepdims=True) - z.mean(axis=1, keepdims=True) + z.mean()
    limit = base.min() / max(np.abs(c).max(), 1e-300)
    c *= scale * limit
    return AlternativeSpec(r, s, c)


def random_table(rng, shape) -> JointTable:
    return random_alternative(rng, shape).table


def brute_pearson(P) -> float:
    P = np.asarray(P, dtype=float)
    I, J = P.shape
    total = 0.0
    for i in range(I):
        for j in range(J):
            ri = sum(P[i, k] for k in range(J))
            sj = sum(P[m, j] for m in range(I))
            total += (P[i, j] - ri * sj) ** 2 / (ri * sj)
    return total


def brute_dcov(P) -> float:
    P = np.asarray(P, dtype=float)
    I, J = P.shape
    total = 0.0
    for i in range(I):
        for j in range(J):
            ri = sum(P[i, k] for k in range(J))
            sj = sum(P[m, j] for m in range(I))
            total += (P[i, j] - ri * sj) ** 2
    return total


def literal_u_statistic(counts) -> float:
    """Order-four U-statistic of squared distance covariance for discrete labels.

    Distances are 0/1 discrete metrics. Uses the Szekely-Rizzo U-centred
    form over the expanded sample, which is O(n^2) but independent of the
    closed form under test.
    """
    counts = np.asarray(counts)
    xs, ys = [], []
    for (i, j), k in np.ndenumerate(counts):
        xs += [i] * int(k)
        ys += [j] * int(k)
    x = np.array(xs)
    y = np.array(ys)
    n = x.size
    a = (x[:, None] != x[None, :]).astype(float)
    b = (y[:, None] != y[None, :]).astype(float)

    def ucentre(d):
        row = d.sum(axis=1)
        tot = d.sum()
        out = d - row[:, None] / (n - 2) - row[None, :] / (n - 2) + tot / ((n - 1) * (n - 2))
        np.fill_diagonal(out, 0.0)
        return out

    A = ucentre(a)
    B = ucentre(b)
    return float((A * B).sum() / (n * (n - 3)))


def literal_u_statistic_quadruples(counts) -> float:
    """Literal average over ordered 4-tuples of distinct indices (tiny n only)."""
    counts = np.asarray(counts)
    xs, ys = [], []
    for (i, j), k in np.ndenumerate(counts):
        xs += [i] * int(k)
        ys += [j] * int(k)
    n = len(xs)
    a = [[float(xs[p] != xs[q]) for q in range(n)] for p in range(n)]
    b = [[float(ys[p] != ys[q]) for q in range(n)] for p in range(n)]
    total = 0.0
    count = 0
    for i, j, k, l in itertools.permutations(range(n), 4):
        total += a[i][j] * (b[i][j] + b[k][l] - 2.0 * b[i][k])
        count += 1
    # E[a_ij b_ij] + E[a_ij] E[b_kl] - 2 E[a_ij b_ik] is dcov^2 for distinct indices
    return total / count


def fd_gradient(functional, table: JointTable, h: float = 1e-6) -> np.ndarray:
    """Central differences along the leave-one-out parametrization."""
    x = vec_star(table.probs)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        fp = functional(JointTable(embed_probs(x + e, table.shape)))
        fm = functional(JointTable(embed_probs(x - e, table.shape)))
        g[k] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a, b) -> float:
    """Max absolute difference over the largest reference magnitude."""
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran in this session."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(mod.line(k, *results[k]))
