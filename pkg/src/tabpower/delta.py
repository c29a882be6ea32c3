"""Delta-method ingredients on the leave-one-out parametrization.

Cells are indexed by column stacking with the last cell ``(I, J)`` dropped;
it is recovered as ``1 - sum(others)`` and marginals are recomputed from
the cells whenever a functional is differentiated.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import kernels
from .tables import AlternativeSpec, DomainError, JointTable, MARGIN_TOL

FUNCTIONALS = {"pearson": kernels.PEARSON, "dcov": kernels.DCOV}

HESSIAN_STEP = 1e-4
HESSIAN_LEVELS = 2
SQRT_EIG_FLOOR = 1e-12


def vec_star(matrix) -> np.ndarray:
    """Stack columns and drop the final ``(I, J)`` entry."""
    m = np.asarray(matrix)
    if m.ndim != 2 or min(m.shape) < 2:
        raise ValueError(f"expected an I x J matrix with I, J >= 2, got shape {m.shape}")
    return m.flatten(order="F")[:-1]


def unvec_star(values, last, shape) -> np.ndarray:
    """Inverse of :func:`vec_star` given the dropped entry."""
    values = np.asarray(values, dtype=np.float64)
    I, J = shape
    if values.size != I * J - 1:
        raise ValueError(f"expected {I * J - 1} entries for shape {shape}, got {values.size}")
    return np.append(values, last).reshape((J, I)).T.copy()


def embed_probs(values, shape) -> np.ndarray:
    """Rebuild a probability matrix, filling the last cell with ``1 - sum``."""
    values = np.asarray(values, dtype=np.float64)
    return unvec_star(values, 1.0 - values.sum(), shape)


def _cell_name(k, I):
    return f"({k % I + 1}, {k // I + 1})"


def sigma_star(table: JointTable) -> np.ndarray:
    """Covariance of ``vec_star(sqrt(n) * pi_hat)`` for one multinomial draw."""
    p = table.probs
    if np.any(p >= 1.0):
        raise DomainError("a cell has probability 1; the multinomial covariance is degenerate")
    if np.any(p == 0):
        warnings.warn("table has a zero cell; Sigma* is singular", RuntimeWarning, stacklevel=2)
    v = vec_star(p)
    return np.diag(v) - np.outer(v, v)


def _parts(alt: AlternativeSpec):
    r = alt.row_marginals
    s = alt.col_marginals
    if np.any(r <= 0) or np.any(s <= 0):
        raise DomainError("gradients need strictly positive marginals")
    return r, s, alt.c


def grad_pearson(alt: AlternativeSpec) -> np.ndarray:
    """Partial derivatives of the Pearson functional, as an ``I x J`` matrix.

    Entry ``(i, j)`` moves mass between cell ``(i, j)`` and ``(I, J)``.
    Rows ``i = I`` and columns ``j = J`` come out of the same expression
    because their own row (column) terms cancel against the last row
    (column). The ``(I, J)`` entry is 0 by convention.
    """
    r, s, c = _parts(alt)
    rs = np.outer(r, s)
    row_sq = (c**2 / (r[:, None] ** 2 * s[None, :])).sum(axis=1)
    col_sq = (c**2 / (r[:, None] * s[None, :] ** 2)).sum(axis=0)
    lin = 2.0 * c / rs
    g = row_sq[-1] + col_sq[-1] - row_sq[:, None] - col_sq[None, :] + lin - lin[-1, -1]
    g[-1, -1] = 0.0
    return g


def grad_dcov(alt: AlternativeSpec) -> np.ndarray:
    """Partial derivatives of the squared distance covariance functional."""
    r, s, c = _parts(alt)
    col_w = r @ c  # sum_m r_m c_mj
    row_w = c @ s  # sum_k s_k c_ik
    g = 2.0 * (col_w[-1] + row_w[-1] - col_w[None, :] - row_w[:, None] + c - c[-1, -1])
    g[-1, -1] = 0.0
    return g


def _stencil(x, h):
    """Points for central second differences at step vector ``h``."""
    m = x.size
    pts = [x]
    eye = np.diag(h)
    for a in range(m):
        pts.append(x + eye[a])
        pts.append(x - eye[a])
    for a in range(m):
        for b in range(a + 1, m):
            pts.append(x + eye[a] + eye[b])
            pts.append(x + eye[a] - eye[b])
            pts.append(x - eye[a] + eye[b])
            pts.append(x - eye[a] - eye[b])
    return np.array(pts)


def _second_differences(f, m, h):
    H = np.empty((m, m))
    f0 = f[0]
    for a in range(m):
        H[a, a] = (f[1 + 2 * a] - 2.0 * f0 + f[2 + 2 * a]) / (h[a] * h[a])
    k = 1 + 2 * m
    for a in range(m):
        for b in range(a + 1, m):
            pp, pm, mp, mm = f[k : k + 4]
            H[a, b] = H[b, a] = (pp - pm - mp + mm) / (4.0 * h[a] * h[b])
            k += 4
    return H


def numeric_hessian(functional, table: JointTable, step: float = HESSIAN_STEP, levels: int = HESSIAN_LEVELS):
    """Hessian of a functional of the ``I*J - 1`` free cells.

    Central differences at steps ``step, step/2, ...`` are combined by
    Richardson extrapolation (``levels`` rounds; ``levels=0`` gives plain
    central differences at ``step``).

    Parameters
    ----------
    functional : {"pearson", "dcov"} or callable
        A callable receives the full ``I x J`` probability matrix.
    table : JointTable
        Expansion point. Every cell must exceed the perturbation it sees.
    """
    I, J = table.shape
    x = vec_star(table.probs).astype(np.float64)
    m = x.size
    h0 = step * np.maximum(1.0, np.abs(x))
    if np.any(x <= h0):
        k = int(np.argmax(x <= h0))
        raise DomainError(f"cell {_cell_name(k, I)} = {x[k]:.3g} is too close to 0 for step {h0[k]:.1e}")
    if table.probs[-1, -1] <= 2.0 * h0.max():
        raise DomainError(f"cell ({I}, {J}) = {table.probs[-1, -1]:.3g} is too close to 0 for the Hessian stencil")

    if callable(functional):
        def evaluate(points):
            return np.array([functional(embed_probs(p, (I, J))) for p in points])
    else:
        try:
            kind = FUNCTIONALS[functional]
        except KeyError:
            raise ValueError(f"unknown functional {functional!r}") from None

        def evaluate(points):
            return kernels.functional_batch(points, I, J, kind)

    table_ = [[_second_differences(evaluate(_stencil(x, h0 / 2**lev)), m, h0 / 2**lev)] for lev in range(levels + 1)]
    # Richardson on an h^2, h^4, ... error series
    for lev in range(1, levels + 1):
        for k in range(1, lev + 1):
            fac = 4.0**k
            prev = table_[lev][k - 1]
            table_[lev].append((fac * prev - table_[lev - 1][k - 1]) / (fac - 1.0))
    H = table_[levels][levels]
    return 0.5 * (H + H.T)


def asymptotic_variance(grad, sigma) -> float:
    """``vec*(grad)^T Sigma* vec*(grad)``; ``grad`` may be the matrix or its vec*."""
    g = np.asarray(grad, dtype=np.float64)
    v = vec_star(g) if g.ndim == 2 else g
    S = np.asarray(sigma, dtype=np.float64)
    if S.shape != (v.size, v.size):
        raise ValueError(f"gradient of length {v.size} does not match Sigma* of shape {S.shape}")
    return max(float(v @ S @ v), 0.0)


def sqrtm_spd(sigma) -> np.ndarray:
    """Symmetric square root of a positive definite matrix."""
    evals, evecs = np.linalg.eigh(np.asarray(sigma, dtype=np.float64))
    if evals.min() < SQRT_EIG_FLOOR:
        raise DomainError(f"Sigma* is not positive definite (smallest eigenvalue {evals.min():.3g})")
    return (evecs * np.sqrt(evals)) @ evecs.T


def sort_weights(w) -> np.ndarray:
    """Descending by absolute value, ties by signed value descending."""
    w = np.asarray(w, dtype=np.float64)
    return w[np.lexsort((-w, -np.abs(w)))]


def second_order_weights(sigma, hessian) -> np.ndarray:
    """Eigenvalues of ``Sigma*^{1/2} H Sigma*^{1/2}``."""
    H = np.asarray(hessian, dtype=np.float64)
    root = sqrtm_spd(sigma)
    if H.shape != root.shape:
        raise ValueError(f"Hessian shape {H.shape} does not match Sigma* {root.shape}")
    sandwich = root @ H @ root
    return sort_weights(np.linalg.eigvalsh(0.5 * (sandwich + sandwich.T)))


def null_weights_dcov(table: JointTable) -> np.ndarray:
    """Weights of the degenerate dcov null law at an independence table.

    Returns all ``I*J - 1`` eigenvalues of half the Hessian sandwich; only
    ``(I-1)(J-1)`` of them are nonzero and those equal the products of the
    row and column marginal eigenvalues.
    """
    if not table.is_independent(MARGIN_TOL):
        raise DomainError("null weights need an independence (outer product) table")
    H = numeric_hessian("dcov", table)
    return sort_weights(0.5 * second_order_weights(sigma_star(table), H))


def marginal_eigenvalues(marginals) -> np.ndarray | None:
    """Closed-form marginal eigenvalues for 2 or 3 categories, else ``None``."""
    p = np.asarray(marginals, dtype=np.float64)
    if p.size == 2:
        return np.array([-2.0 * p[0] * p[1]])
    if p.size == 3:
        a = p[0] * p[1] + p[0] * p[2] + p[1] * p[2]
        b = np.sqrt(max((p[0] * p[1]) ** 2 + (p[0] * p[2]) ** 2 + (p[1] * p[2]) ** 2 - p.prod(), 0.0))
        return np.array([-a - b, -a + b])
    return None
