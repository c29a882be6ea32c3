"""The numba and pure-numpy kernel paths must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_table
from tabpower import _accel, kernels
from tabpower.delta import vec_star
from tabpower.tables import CountTable, dcov_functional, pearson_functional, stat_dcov_mle, stat_dcov_unbiased, stat_pearson

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def _counts(rng, R=300, shape=(3, 4), n=40):
    p = random_table(rng, shape).probs.ravel()
    return rng.multinomial(n, p, size=R).reshape(R, *shape), n


def test_batch_statistics_match_scalar_functions(rng):
    counts, n = _counts(rng, R=50)
    pearson, dhat, dtilde, zero = kernels.batch_statistics(counts, n)
    for k in range(50):
        ct = CountTable(counts[k])
        assert dhat[k] == pytest.approx(stat_dcov_mle(ct), abs=1e-15)
        assert dtilde[k] == pytest.approx(stat_dcov_unbiased(ct), abs=1e-14)
        if zero[k]:
            assert np.isnan(pearson[k])
        else:
            assert pearson[k] == pytest.approx(stat_pearson(ct), rel=1e-13)


def test_zero_marginal_is_flagged():
    counts = np.array([[[4, 0], [4, 0]], [[2, 2], [2, 2]]])
    pearson, _, _, zero = kernels.batch_statistics(counts, 8)
    assert zero.tolist() == [True, False]
    assert np.isnan(pearson[0]) and pearson[1] == 0.0


@needs_numba
def test_batch_statistics_numba_equals_numpy(rng):
    counts, n = _counts(rng, R=2000, shape=(6, 6), n=150)
    counts[0] = 0
    counts[0, 0, 0] = n  # forces zero marginals
    a = kernels._batch_statistics_numba(np.ascontiguousarray(counts, dtype=np.int64), n)
    b = kernels._batch_statistics_numpy(counts, n)
    np.testing.assert_array_equal(a[3], b[3])
    for x, y in zip(a[:3], b[:3]):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-15, equal_nan=True)


@needs_numba
@pytest.mark.parametrize("kind", [kernels.PEARSON, kernels.DCOV])
def test_functional_batch_numba_equals_numpy(rng, kind):
    t = random_table(rng, (4, 3))
    pts = vec_star(t.probs) + 1e-4 * rng.standard_normal((100, 11))
    a = kernels._functional_batch_numba(pts, 4, 3, kind)
    b = kernels._functional_batch_numpy(pts, 4, 3, kind)
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_functional_batch_matches_table_functionals(rng):
    t = random_table(rng, (3, 5))
    x = vec_star(t.probs)[None, :]
    assert kernels.functional_batch(x, 3, 5, kernels.PEARSON)[0] == pytest.approx(pearson_functional(t), rel=1e-13)
    assert kernels.functional_batch(x, 3, 5, kernels.DCOV)[0] == pytest.approx(dcov_functional(t), rel=1e-13)


@needs_numba
def test_imhof_parts_numba_equals_numpy(rng):
    w = rng.standard_normal(12)
    for t in (0.0, 0.3, 5.0, 200.0):
        a = kernels._imhof_parts_numba(t, w, 0.7)
        b = kernels._imhof_parts_numpy(t, w, 0.7)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)


def test_env_flag_selects_numpy_path():
    code = "from tabpower import _accel, kernels; print(_accel.USE_NUMBA, kernels.imhof_parts.__name__)"
    env = dict(os.environ, TABPOWER_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "_imhof_parts_numpy"]
