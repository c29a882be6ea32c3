"""Hot numeric kernels with numba and pure-numpy implementations.

Every public kernel ``foo`` dispatches to ``_foo_numba`` or ``_foo_numpy``
according to :data:`tabpower._accel.USE_NUMBA`. Both variants are kept
importable so tests and ``benchmarks/bench_kernels.py`` can compare them.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

PEARSON = 0
DCOV = 1


# ---------------------------------------------------------------------------
# Replicate statistics
# ---------------------------------------------------------------------------


def _batch_statistics_numpy(counts, n):
    counts = np.asarray(counts, dtype=np.float64)
    P = counts / n
    r = P.sum(axis=2)
    s = P.sum(axis=1)
    e = r[:, :, None] * s[:, None, :]
    ok = (r > 0).all(axis=1) & (s > 0).all(axis=1)
    dev2 = (P - e) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        pearson = np.where(ok, (dev2 / np.where(e > 0, e, 1.0)).sum(axis=(1, 2)), np.nan)
    dhat = dev2.sum(axis=(1, 2))
    pe = (P * e).sum(axis=(1, 2))
    A = (r**2).sum(axis=1)
    B = (s**2).sum(axis=1)
    dtilde = unbiased_from_parts(dhat, pe, A, B, float(n))
    return pearson, dhat, dtilde, ~ok


def unbiased_from_parts(dhat, pe, A, B, n):
    """Closed-form unbiased dcov from ``dhat``, ``sum(P*r*s)``, ``sum r^2``, ``sum s^2``."""
    return (
        n / (n - 3.0) * dhat
        - 4.0 * n / ((n - 2.0) * (n - 3.0)) * pe
        + n / ((n - 1.0) * (n - 3.0)) * (A + B)
        + n * (3.0 * n - 2.0) / ((n - 1.0) * (n - 2.0) * (n - 3.0)) * A * B
        - n / ((n - 1.0) * (n - 3.0))
    )


_unbiased_from_parts = njit(unbiased_from_parts)


@njit
def _batch_statistics_numba(counts, n):
    R, I, J = counts.shape
    pearson = np.empty(R)
    dhat = np.empty(R)
    dtilde = np.empty(R)
    zero = np.zeros(R, dtype=np.bool_)
    r = np.empty(I)
    s = np.empty(J)
    fn = float(n)
    for k in range(R):
        r[:] = 0.0
        s[:] = 0.0
        for i in range(I):
            for j in range(J):
                p = counts[k, i, j] / fn
                r[i] += p
                s[j] += p
        bad = False
        for i in range(I):
            if r[i] <= 0.0:
                bad = True
        for j in range(J):
            if s[j] <= 0.0:
                bad = True
        chi = 0.0
        d = 0.0
        pe = 0.0
        for i in range(I):
            for j in range(J):
                p = counts[k, i, j] / fn
                e = r[i] * s[j]
                dev = p - e
                d += dev * dev
                pe += p * e
                if not bad:
                    chi += dev * dev / e
        A = 0.0
        for i in range(I):
            A += r[i] * r[i]
        B = 0.0
        for j in range(J):
            B += s[j] * s[j]
        pearson[k] = np.nan if bad else chi
        dhat[k] = d
        dtilde[k] = _unbiased_from_parts(d, pe, A, B, fn)
        zero[k] = bad
    return pearson, dhat, dtilde, zero


def batch_statistics(counts, n):
    """Pearson, MLE and unbiased dcov statistics for a stack of count tables.

    Parameters
    ----------
    counts : ndarray, shape (R, I, J)
        Integer counts; every table sums to ``n``.
    n : int
        Sample size (must exceed 3 for the unbiased statistic).

    Returns
    -------
    pearson, dhat, dtilde : ndarray, shape (R,)
        Unscaled statistics. ``pearson`` is NaN where a sample marginal is 0.
    zero_marginal : ndarray of bool, shape (R,)
    """
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    if USE_NUMBA:
        return _batch_statistics_numba(counts, int(n))
    return _batch_statistics_numpy(counts, int(n))


# ---------------------------------------------------------------------------
# Functionals on the leave-one-out parametrization
# ---------------------------------------------------------------------------


def _functional_batch_numpy(points, I, J, kind):
    points = np.asarray(points, dtype=np.float64)
    last = 1.0 - points.sum(axis=1, keepdims=True)
    full = np.concatenate([points, last], axis=1)
    # column stacking: flat index k -> (k % I, k // I)
    P = full.reshape(-1, J, I).transpose(0, 2, 1)
    r = P.sum(axis=2)
    s = P.sum(axis=1)
    e = r[:, :, None] * s[:, None, :]
    dev2 = (P - e) ** 2
    if kind == PEARSON:
        return (dev2 / e).sum(axis=(1, 2))
    return dev2.sum(axis=(1, 2))


@njit
def _functional_batch_numba(points, I, J, kind):
    K, m = points.shape
    out = np.empty(K)
    P = np.empty((I, J))
    r = np.empty(I)
    s = np.empty(J)
    for k in range(K):
        tot = 0.0
        for idx in range(m):
            P[idx % I, idx // I] = points[k, idx]
            tot += points[k, idx]
        P[I - 1, J - 1] = 1.0 - tot
        r[:] = 0.0
        s[:] = 0.0
        for i in range(I):
            for j in range(J):
                r[i] += P[i, j]
                s[j] += P[i, j]
        acc = 0.0
        for i in range(I):
            for j in range(J):
                e = r[i] * s[j]
                dev = P[i, j] - e
                if kind == 0:
                    acc += dev * dev / e
                else:
                    acc += dev * dev
        out[k] = acc
    return out


def functional_batch(points, I, J, kind):
    """Evaluate the Pearson (``kind=0``) or dcov (``kind=1``) functional.

    ``points`` holds one leave-one-out vector per row (length ``I*J - 1``,
    column-stacked); the omitted last cell is ``1 - sum`` and marginals
    are recomputed from the cells.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if USE_NUMBA:
        return _functional_batch_numba(points, int(I), int(J), int(kind))
    return _functional_batch_numpy(points, int(I), int(J), int(kind))


# ---------------------------------------------------------------------------
# Characteristic-function inversion integrand
# ---------------------------------------------------------------------------
#
# For X = mu + sigma*Z0 + sum_g w_g Z_g^2, phi(t) e^{-it mu} = rho(t) e^{i theta(t)}
# with rho = exp(-sigma^2 t^2 / 2) prod (1 + 4 w^2 t^2)^(-1/4) and
# theta = 0.5 * sum arctan(2 w t).


def _imhof_parts_numpy(t, w, sigma):
    wt = 2.0 * w * t
    log_rho = -0.5 * (sigma * t) ** 2 - 0.25 * np.log1p(wt * wt).sum()
    theta = 0.5 * np.arctan(wt).sum()
    rho = math.exp(log_rho)
    return rho, theta


@njit
def _imhof_parts_numba(t, w, sigma):
    log_rho = -0.5 * (sigma * t) ** 2
    theta = 0.0
    for g in range(w.shape[0]):
        wt = 2.0 * w[g] * t
        log_rho -= 0.25 * math.log1p(wt * wt)
        theta += 0.5 * math.atan(wt)
    return math.exp(log_rho), theta


# (rho, theta) at a scalar t; bound directly to avoid wrapper overhead inside quad.
imhof_parts = _imhof_parts_numba if USE_NUMBA else _imhof_parts_numpy
